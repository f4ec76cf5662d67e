import itertools

import numpy as np
import pytest

from qfactor.cpmaps import (CPMap, ChoiOperator, apply, choi_distance, classical_map, compose,
                            discard_input, from_choi, identity_map, independence_residual,
                            is_independent_of, is_tp, is_trace_nonincreasing, is_unital,
                            marginal_map, rescale_to_nonincreasing,
                            sequence_choi, stinespring, tensor_maps, to_choi, tp_completion,
                            trace_map, trace_output, unitary_map)
from qfactor.entropic import Partition, cond_mutual_info
from qfactor.errors import LayoutError, NotCPError, PreconditionError
from qfactor.synthetic import random_cp, random_cptp, random_state, random_unitary
from qfactor.tensor import (Operator, SystemLayout, max_entangled, partial_trace,
                            partial_trace_keep, permute_systems, trace_norm)

from conftest import random_matrix

Q = SystemLayout.of(("Q", 2))


def units(d):
    for i, j in itertools.product(range(d), repeat=2):
        e = np.zeros((d, d))
        e[i, j] = 1
        yield e


def depolarizing(layout):
    d = layout.total_dim
    ops = [np.outer(np.eye(d)[i], np.eye(d)[j]) / np.sqrt(d) for i in range(d) for j in range(d)]
    return CPMap(np.array(ops), layout, layout)


def same_action(m1, m2, tol=1e-10):
    return all(np.allclose(apply(m1, Operator(e, m1.in_layout)).matrix,
                           apply(m2, Operator(e, m2.in_layout)).matrix, atol=tol)
               for e in units(m1.d_in))


class TestApply:
    def test_identity(self, rng):
        w = Operator(random_matrix(rng, 2), Q)
        assert np.allclose(apply(identity_map(Q), w).matrix, w.matrix)

    def test_depolarizing(self, rng):
        lay = SystemLayout.of(("Q", 3))
        rho = Operator(random_state(3, rng), lay)
        assert np.allclose(apply(depolarizing(lay), rho).matrix, np.eye(3) / 3)

    @pytest.mark.parametrize("target", ["A", "B", "C"])
    def test_padding_matches_kron(self, rng, target):
        lay = SystemLayout.of(("A", 2), ("B", 3), ("C", 2))
        m = random_cp(lay.select([target]), lay.select([target]), rng, n_kraus=3)
        w = Operator(random_matrix(rng, 12), lay)
        out = apply(m, w)
        expected = np.zeros((12, 12), dtype=complex)
        for e in m.kraus:
            facs = [e if lab == target else np.eye(d) for lab, d in lay.factors]
            big = np.kron(np.kron(facs[0], facs[1]), facs[2])
            expected += big @ w.matrix @ big.conj().T
        assert out.row.labels == lay.labels
        assert np.allclose(out.matrix, expected, atol=1e-12)

    def test_output_replaces_input_position(self, rng):
        lay = SystemLayout.of(("A", 2), ("B", 3))
        m = random_cptp(lay.select(["A"]), [("X", 4)], rng)
        out = apply(m, Operator(random_state(6, rng), lay))
        assert out.row.labels == ("X", "B")

    def test_layout_mismatch(self, rng):
        m = identity_map([("Z", 2)])
        with pytest.raises(LayoutError):
            apply(m, Operator(np.eye(2), Q))

    def test_trace_nonincreasing_on_states(self, rng):
        m, _ = rescale_to_nonincreasing(random_cp(Q, Q, rng, scale=3))
        rho = Operator(random_state(2, rng), Q)
        assert apply(m, rho).trace().real <= 1 + 1e-12


class TestChoi:
    def test_identity_is_psi(self):
        c = to_choi(identity_map(Q))
        assert np.allclose(c.matrix.matrix, max_entangled(2).matrix)
        assert c.matrix.row.labels == ("Q", "Q~")

    def test_tp_marginal(self, rng):
        m = random_cptp(Q, [("R", 3)], rng)
        c = to_choi(m).matrix
        assert np.allclose(partial_trace(c, ["R"]).matrix, np.eye(2) / 2, atol=1e-12)

    def test_depolarizing(self):
        c = to_choi(depolarizing(Q)).matrix
        assert np.allclose(c.matrix, np.eye(4) / 4)

    def test_from_choi_psi(self):
        m = from_choi(ChoiOperator(Operator(max_entangled(2).matrix,
                                            SystemLayout.of(("Q", 2), ("Q~", 2))), Q))
        assert same_action(m, identity_map(Q))

    def test_from_choi_round_trip(self, rng):
        lay = SystemLayout.of(("A", 2), ("B", 2))
        m = random_cptp(lay, lay, rng, n_kraus=3)
        assert same_action(from_choi(to_choi(m)), m)

    def test_constant_channel(self, rng):
        c = ChoiOperator(Operator(np.eye(4) / 4, SystemLayout.of(("Q", 2), ("Q~", 2))), Q)
        m = from_choi(c)
        rho = Operator(random_state(2, rng), Q)
        assert np.allclose(apply(m, rho).matrix, np.eye(2) / 2)

    def test_not_cp(self):
        mat = np.diag([0.6, 0.6, 0.6, -0.8])
        with pytest.raises(NotCPError):
            from_choi(ChoiOperator(Operator(mat, SystemLayout.of(("Q", 2), ("Q~", 2))), Q))

    @pytest.mark.parametrize("d_in,d_out", [(2, 2), (2, 3), (4, 2), (3, 4)])
    def test_round_trip_random_psd(self, rng, d_in, d_out):
        lay_in, lay_out = SystemLayout.of(("X", d_in)), SystemLayout.of(("Y", d_out))
        c = Operator(random_state(d_in * d_out, rng), lay_out + lay_in.tilde())
        back = to_choi(from_choi(ChoiOperator(c, lay_in))).matrix
        assert trace_norm(back.matrix - c.matrix) <= 1e-10

    @pytest.mark.parametrize("seed", range(5))
    def test_tp_iff_marginal_is_pi(self, seed):
        rng = np.random.default_rng(seed)
        lay = SystemLayout.of(("X", 3))
        for m, tp in [(random_cptp(lay, [("Y", 2)], rng, n_kraus=3), True),
                      (random_cp(lay, [("Y", 2)], rng), False)]:
            marg = partial_trace(to_choi(m).matrix, ["Y"]).matrix
            assert bool(is_tp(m)) == tp
            assert (np.max(np.abs(marg - np.eye(3) / 3)) <= 1e-10) == tp

    def test_nonincreasing_iff_marginal_below_pi(self, rng):
        lay = SystemLayout.of(("X", 3))
        for scale in (0.3, 3.0):
            m = random_cp(lay, [("Y", 2)], rng, scale=scale)
            marg = partial_trace(to_choi(m).matrix, ["Y"]).matrix
            below = np.linalg.eigvalsh(np.eye(3) / 3 + 1e-10 * np.eye(3) - marg)[0] >= 0
            assert below == bool(is_trace_nonincreasing(m))

    def test_product_maps_product_choi(self, rng):
        a = random_cptp([("A", 2)], [("X", 2)], rng)
        b = random_cp([("B", 3)], [("Y", 2)], rng)
        ca, cb = to_choi(a).matrix, to_choi(b).matrix
        cab = to_choi(tensor_maps(a, b)).matrix
        expected = Operator(np.kron(ca.matrix, cb.matrix), ca.row + cb.row)
        expected = permute_systems(expected, cab.row.labels)
        assert np.max(np.abs(cab.matrix - expected.matrix)) <= 1e-12

    def test_sequence_choi_both_paths(self, rng):
        lay = SystemLayout.of(("A", 2), ("B", 3))
        m1 = random_cptp(lay, [("C", 4)], rng, n_kraus=3)
        m2 = random_cptp([("C", 4)], [("D", 2)], rng, n_kraus=2)
        m3 = random_cptp([("D", 2)], [("E", 5)], rng, n_kraus=3)
        for maps in [(m1, m2), (m1, m2, m3), (m1,)]:
            total = maps[0]
            for m in maps[1:]:
                total = compose(m, total)
            direct = to_choi(total)
            assert choi_distance(direct, sequence_choi(lay, *maps)) <= 1e-12


class TestCompose:
    def test_identity(self, rng):
        m = random_cp(Q, [("R", 3)], rng)
        assert same_action(compose(identity_map([("R", 3)]), m), m)

    def test_tensor_identities(self):
        m = tensor_maps(identity_map([("A", 2)]), identity_map([("B", 3)]))
        assert same_action(m, identity_map([("A", 2), ("B", 3)]))

    def test_against_sequential_apply(self, rng):
        m = random_cp(Q, [("R", 3)], rng, n_kraus=2)
        n = random_cp([("R", 3)], [("S", 2)], rng, n_kraus=3)
        rho = Operator(random_state(2, rng), Q)
        assert np.allclose(apply(compose(n, m), rho).matrix, apply(n, apply(m, rho)).matrix,
                           atol=1e-12)

    def test_mismatch(self, rng):
        with pytest.raises(LayoutError):
            compose(identity_map([("Z", 2)]), identity_map(Q))


class TestPredicates:
    def test_identity(self):
        m = identity_map(Q)
        assert is_tp(m) and is_trace_nonincreasing(m) and is_unital(m)

    def test_unitary(self, rng):
        m = unitary_map(random_unitary(3, rng), [("Q", 3)])
        assert is_tp(m) and is_trace_nonincreasing(m) and is_unital(m)

    def test_half_identity(self):
        m = CPMap(np.eye(2)[None] / np.sqrt(2), Q, Q)
        assert not is_tp(m)
        assert is_trace_nonincreasing(m)
        assert not is_unital(m)
        assert np.isclose(is_tp(m).residual, 0.5)

    @pytest.mark.parametrize("seed", range(10))
    def test_unital_and_nonincreasing_implies_tp(self, seed):
        rng = np.random.default_rng(seed)
        # random mixtures of unitaries are unital, scaled copies are not TP
        us = [random_unitary(3, rng) for _ in range(3)]
        p = rng.dirichlet(np.ones(3))
        for scale in (1.0, 0.9):
            m = CPMap(np.array([np.sqrt(scale * q) * u for q, u in zip(p, us)]),
                      [("Q", 3)], [("Q", 3)])
            if is_unital(m) and is_trace_nonincreasing(m):
                assert is_tp(m)
            assert bool(is_unital(m)) == (scale == 1.0)


class TestIndependence:
    def lay(self):
        return SystemLayout.of(("I", 2), ("K", 3))

    def test_built_independent(self, rng):
        bar = random_cptp([("K", 3)], [("A", 2)], rng, n_kraus=3)
        m = discard_input(bar, SystemLayout.of(("I", 2)))
        assert is_independent_of(m, "I")
        assert choi_distance(marginal_map(m, "I"), bar) <= 1e-12

    def test_copy_map_depends(self):
        lay = SystemLayout.of(("I", 2), ("K", 2))
        table = np.zeros((4, 2))
        for x in range(4):
            table[x, x // 2] = 1
        m = classical_map(table, lay, [("A", 2)])
        assert not is_independent_of(m, "I")
        assert independence_residual(m, "I") > 0.1

    def test_marginal_state_invariance(self, rng):
        bar = random_cptp([("K", 3)], [("A", 2)], rng, n_kraus=3)
        m = discard_input(bar, SystemLayout.of(("I", 2)))
        zero = np.diag([1.0, 0.0])
        assert choi_distance(marginal_map(m, "I"), marginal_map(m, "I", zero)) <= 1e-12

    def test_unknown_label(self, rng):
        m = random_cptp(self.lay(), [("A", 2)], rng, n_kraus=6)
        with pytest.raises(LayoutError):
            independence_residual(m, "Z")

    def test_independent_map_choi_has_zero_cmi(self, rng):
        """Choi state of an I-independent map has I(out : I~ | rest~) = 0."""
        bar = random_cptp([("K", 3)], [("A", 2)], rng, n_kraus=4)
        m = discard_input(bar, SystemLayout.of(("I", 2)))
        rho = to_choi(m).matrix
        cmi = cond_mutual_info(rho, Partition(["A"], ["I~"], ["K~"]))
        assert abs(cmi) <= 1e-9


class TestRescaleAndCompletion:
    def test_tp_unchanged(self, rng):
        m = random_cptp(Q, Q, rng)
        out, lam = rescale_to_nonincreasing(m)
        assert lam == 1.0 and out is m

    def test_sqrt2(self):
        m = CPMap(np.sqrt(2) * np.eye(2)[None], Q, Q)
        out, lam = rescale_to_nonincreasing(m)
        assert np.isclose(lam, 2)
        assert is_tp(out)

    @pytest.mark.parametrize("seed", range(5))
    def test_random(self, seed):
        m = random_cp(Q, [("R", 3)], np.random.default_rng(seed), scale=4)
        assert is_trace_nonincreasing(rescale_to_nonincreasing(m)[0])

    def test_completion_of_tp_map(self, rng):
        m = random_cptp(Q, [("R", 3)], rng)
        c = tp_completion(m)
        assert is_tp(c)
        rho = apply(c, Operator(random_state(2, rng), Q)).matrix
        assert abs(rho[3, 3]) <= 1e-12

    def test_completion_half_identity(self, rng):
        c = tp_completion(CPMap(np.eye(2)[None] / np.sqrt(2), Q, Q))
        assert is_tp(c)
        for _ in range(5):
            rho = apply(c, Operator(random_state(2, rng), Q)).matrix
            assert np.isclose(rho[2, 2].real, 0.5)

    def test_completion_restricts_to_original(self, rng):
        m, _ = rescale_to_nonincreasing(random_cp(Q, [("R", 3)], rng, scale=2))
        c = tp_completion(m)
        w = Operator(random_state(2, rng), Q)
        assert np.allclose(apply(c, w).matrix[:3, :3], apply(m, w).matrix, atol=1e-12)

    def test_completion_keeps_independence(self, rng):
        bar, _ = rescale_to_nonincreasing(random_cp([("K", 2)], [("B", 2)], rng, scale=2))
        m = discard_input(bar, SystemLayout.of(("I", 2)))
        assert is_independent_of(m, "I")
        assert is_independent_of(tp_completion(m), "I")

    def test_completion_needs_nonincreasing(self):
        with pytest.raises(PreconditionError):
            tp_completion(CPMap(np.sqrt(2) * np.eye(2)[None], Q, Q))


class TestStinespring:
    def test_identity(self):
        v = stinespring(identity_map(Q))
        assert v.row.labels == ("Q", "R")
        assert np.allclose(v.matrix, np.kron(np.eye(2), [[1.0]]))

    def test_random(self, rng):
        m = random_cptp(Q, [("S", 3)], rng, n_kraus=4)
        v = stinespring(m)
        assert v.row.dim_of("R") == m.n_kraus
        assert np.max(np.abs(v.matrix.conj().T @ v.matrix - np.eye(2))) <= 1e-12
        for _ in range(10):
            rho = random_state(2, rng)
            lifted = Operator(v.matrix @ rho @ v.matrix.conj().T, v.row)
            assert np.max(np.abs(partial_trace(lifted, ["R"]).matrix
                                 - apply(m, Operator(rho, Q)).matrix)) <= 1e-12

    def test_not_tp(self, rng):
        with pytest.raises(PreconditionError):
            stinespring(random_cp(Q, Q, rng, scale=3))


def test_scalar_output_map_is_trace_against_kraus_sum(rng):
    """A map to the trivial system acts as ``W -> tr(M W)`` with ``M = sum E^dag E``."""
    lay = SystemLayout.of(("A", 2), ("B", 2))
    m = random_cp(lay, SystemLayout(), rng, n_kraus=3)
    big = m.kraus_sum()
    assert np.allclose(big, big.conj().T)
    for _ in range(5):
        w = random_matrix(rng, 4)
        out = apply(m, Operator(w, lay)).matrix
        assert out.shape == (1, 1)
        assert abs(out[0, 0] - np.trace(big @ w)) <= 1e-12


def test_trace_map_and_trace_output(rng):
    lay = SystemLayout.of(("A", 2), ("B", 3))
    m = random_cptp(lay, [("X", 2), ("Y", 2)], rng, n_kraus=3)
    rho = Operator(random_state(6, rng), lay)
    full = apply(m, rho)
    assert np.allclose(apply(trace_output(m, ["Y"]), rho).matrix,
                       partial_trace(full, ["Y"]).matrix, atol=1e-12)
    assert np.isclose(apply(trace_map(lay), rho).matrix[0, 0], 1)
    assert np.allclose(partial_trace_keep(full, ["X"]).matrix,
                       partial_trace(full, ["Y"]).matrix, atol=1e-12)
