import numpy as np
import pytest

from qfactor.entropic import EPS_CMI, Partition, cond_mutual_info, vn_entropy
from qfactor.errors import LayoutError, StateError
from qfactor.synthetic import random_state
from qfactor.tensor import Operator, SystemLayout, kron

from conftest import state_on

ABC = SystemLayout.of(("A", 2), ("B", 2), ("C", 2))
PART = Partition(["A"], ["B"], ["C"])


def ket(*bits):
    v = np.zeros(2 ** len(bits))
    v[int("".join(map(str, bits)), 2)] = 1
    return v


class TestEntropy:
    def test_pure(self, rng):
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        v /= np.linalg.norm(v)
        assert abs(vn_entropy(np.outer(v, v.conj()))) <= 1e-12

    @pytest.mark.parametrize("d", [1, 2, 3, 8])
    def test_maximally_mixed(self, d):
        assert np.isclose(vn_entropy(np.eye(d) / d), np.log2(d))

    def test_binary(self):
        h = -(0.25 * np.log2(0.25) + 0.75 * np.log2(0.75))
        assert np.isclose(vn_entropy(np.diag([0.25, 0.75])), h)
        assert np.isclose(h, 0.811278, atol=1e-6)

    def test_natural_base(self):
        assert np.isclose(vn_entropy(np.eye(2) / 2, base=np.e), np.log(2))

    def test_not_a_state(self):
        with pytest.raises(StateError):
            vn_entropy(np.eye(2))
        with pytest.raises(StateError):
            vn_entropy(np.diag([1.5, -0.5]))


class TestCMI:
    def test_product(self, rng):
        rho = kron(kron(state_on(rng, ("A", 2)), state_on(rng, ("B", 2))), state_on(rng, ("C", 2)))
        assert abs(cond_mutual_info(rho, PART)) <= 1e-10

    def test_classical_correlated(self):
        mat = 0.5 * (np.outer(ket(0, 0, 0), ket(0, 0, 0)) + np.outer(ket(1, 1, 1), ket(1, 1, 1)))
        assert abs(cond_mutual_info(Operator(mat, ABC), PART)) <= 1e-12

    def test_ghz(self):
        v = (ket(0, 0, 0) + ket(1, 1, 1)) / np.sqrt(2)
        assert np.isclose(cond_mutual_info(Operator(np.outer(v, v), ABC), PART), 1.0)

    def test_partition_mismatch(self, rng):
        rho = Operator(random_state(8, rng), ABC)
        with pytest.raises(LayoutError):
            cond_mutual_info(rho, Partition(["A"], ["B"]))
        with pytest.raises(LayoutError):
            Partition(["A"], ["A"], ["C"])

    def test_empty_conditioning_is_mutual_information(self):
        v = (ket(0, 0) + ket(1, 1)) / np.sqrt(2)
        rho = Operator(np.outer(v, v), SystemLayout.of(("A", 2), ("B", 2)))
        assert np.isclose(cond_mutual_info(rho, Partition(["A"], ["B"])), 2.0)

    def test_strong_subadditivity(self):
        rng = np.random.default_rng(0)
        dims = [(2, 2, 2), (2, 3, 2), (3, 2, 4), (2, 2, 6), (2, 4, 3)]
        worst = np.inf
        for n in range(500):
            da, db, dc = dims[n % len(dims)]
            lay = SystemLayout.of(("A", da), ("B", db), ("C", dc))
            rank = int(rng.integers(1, lay.total_dim + 1))
            rho = Operator(random_state(lay.total_dim, rng, rank), lay)
            worst = min(worst, cond_mutual_info(rho, PART))
        assert worst >= -EPS_CMI

    def test_additivity(self, rng):
        r1 = state_on(rng, ("A", 2), ("B", 2), ("C", 2))
        r2 = state_on(rng, ("A2", 2), ("B2", 2), ("C2", 2))
        joint = kron(r1, r2)
        part = Partition(["A", "A2"], ["B", "B2"], ["C", "C2"])
        p2 = Partition(["A2"], ["B2"], ["C2"])
        total = cond_mutual_info(r1, PART) + cond_mutual_info(r2, p2)
        assert abs(cond_mutual_info(joint, part) - total) <= 1e-9

    def test_zero_set_base_invariant(self):
        mat = 0.5 * (np.outer(ket(0, 0, 0), ket(0, 0, 0)) + np.outer(ket(1, 1, 1), ket(1, 1, 1)))
        rho = Operator(mat, ABC)
        for base in (2.0, np.e, 10.0):
            assert abs(cond_mutual_info(rho, PART, base=base)) <= EPS_CMI
        v = (ket(0, 0, 0) + ket(1, 1, 1)) / np.sqrt(2)
        ghz = Operator(np.outer(v, v), ABC)
        for base in (2.0, np.e, 10.0):
            assert cond_mutual_info(ghz, PART, base=base) > EPS_CMI
