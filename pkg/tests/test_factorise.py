import numpy as np
import pytest

from qfactor.cpmaps import (choi_distance, compose, identity_map, is_tp, permute_output, relabel,
                            state_map, tensor_maps, to_choi, trace_output)
from qfactor.doubling import build_doubling_map
from qfactor.entropic import Partition, cond_mutual_info
from qfactor.errors import ConditionError, LayoutError, PreconditionError
from qfactor.factorise import (FactorisationInstance, check_conditions, converse_construct,
                               factorise)
from qfactor.synthetic import (K4_STRUCTURES, converse_instance, random_cp, random_cptp,
                               random_decomposition)
from qfactor.tensor import SystemLayout

H = SystemLayout.of(("I", 2), ("K", 3), ("J", 2))


def trivial_instance():
    """``M: W -> pi_A (x) W`` and ``N: W -> pi_B tr W``."""
    m = tensor_maps(state_map([("A", 2)]), identity_map(H))
    n = compose(state_map([("B", 2)]), trace_output(identity_map(H), H.labels))
    return FactorisationInstance(m, n)


def test_instance_validation(rng):
    m = tensor_maps(state_map([("A", 2)]), identity_map(H))
    with pytest.raises(LayoutError):
        FactorisationInstance(m, random_cptp([("I", 2), ("K", 3)], [("B", 2)], rng, n_kraus=3))
    with pytest.raises(LayoutError):
        FactorisationInstance(m, random_cptp(H, [("A", 2)], rng, n_kraus=6))


def test_trivial_conditions():
    rep = check_conditions(trivial_instance())
    assert rep.ok
    for r in (rep.cond1_residual, rep.cond2_unital_residual, rep.cond3_m_residual,
              rep.cond3_n_residual):
        assert 0 <= r <= 1e-12


def test_trivial_factorisation():
    cert = factorise(trivial_instance())
    assert len(cert.decomposition.blocks) == 1
    assert cert.residual <= 1e-10
    assert is_tp(cert.d, 1e-10)


@pytest.mark.parametrize("dims", K4_STRUCTURES)
def test_converse_round_trip(dims):
    rng = np.random.default_rng(sum(a * 10 + b for a, b in dims))
    inst = converse_instance(dims, rng)
    rep = check_conditions(inst)
    assert rep.ok, rep.failed()
    cert = factorise(inst)
    assert cert.residual <= 1e-8
    assert cert.claim1_cmi <= 1e-9
    d_k = cert.decomposition.ambient_dim
    for (d_a, d_b), w in zip(cert.decomposition.dims, cert.block_weights):
        assert abs(w - d_a * d_b / d_k) <= 1e-9
    assert is_tp(cert.d, 1e-10)


def test_two_block_multiset():
    inst = converse_instance([(2, 1), (1, 2)], np.random.default_rng(11))
    cert = factorise(inst)
    assert sorted(cert.decomposition.dims) == [(1, 2), (2, 1)]


def test_choi_state_is_markov():
    inst = converse_instance([(2, 2)], np.random.default_rng(2))
    rho = to_choi(compose(inst.n, inst.m)).matrix
    part = Partition(("A", "I~"), ("B", "J~"), ("K~",))
    assert cond_mutual_info(rho, part) <= 1e-9


def test_non_tp_second_map():
    inst = converse_instance([(2, 1), (1, 2)], np.random.default_rng(4), tp_b=False)
    assert not is_tp(inst.n)
    cert = factorise(inst)
    assert cert.residual <= 1e-8
    assert cert.rescale >= 1.0


def test_weak_unital_path():
    inst = converse_instance([(2, 2)], np.random.default_rng(5))
    reset = np.diag([1.0, 0.0])
    m = trace_output(inst.m, ["I"])
    m = compose(state_map(inst.m.out_layout.select(["I"]), reset), m)
    m = permute_output(m, inst.m.out_layout.labels)
    weak = FactorisationInstance(m, inst.n)
    rep = check_conditions(weak)
    assert not rep.cond2_strict_ok and rep.cond2_weak_ok
    cert = factorise(weak)
    assert cert.weak_path
    assert cert.residual <= 1e-8


def test_condition_failure_reported(rng):
    # N reads I: condition (iii) breaks
    inst = converse_instance([(2, 2)], rng)
    n = random_cptp(inst.n.in_layout, [("B", 2)], rng, n_kraus=inst.n.d_in)
    bad = FactorisationInstance(inst.m, n)
    with pytest.raises(ConditionError) as err:
        factorise(bad)
    assert "iii" in err.value.failed
    assert err.value.report is not None


def test_transport_reproduces_psi():
    """``sum_z (U_z (x) conj U_z) vec(id)`` is the computational-basis ``psi``."""
    inst = converse_instance([(2, 1), (1, 2)], np.random.default_rng(8))
    decomp = factorise(inst).decomposition
    d = decomp.ambient_dim
    vec = sum(np.kron(b.isometry, b.isometry.conj()) @ np.eye(b.size).reshape(-1)
              for b in decomp.blocks)
    assert np.max(np.abs(vec - np.eye(d).reshape(-1))) <= 1e-12


def test_deterministic():
    inst = converse_instance([(2, 1), (1, 2)], np.random.default_rng(9))
    a, b = factorise(inst, seed=1), factorise(inst, seed=1)
    assert np.array_equal(a.d.kraus, b.d.kraus)


class TestConverse:
    def test_constant_maps(self):
        decomp = random_decomposition([(2, 1), (1, 2)], np.random.default_rng(0))
        a = compose(state_map([("A", 2)]), trace_output(identity_map([("I", 2), ("K", 4)]),
                                                        ["I", "K"]))
        b = compose(state_map([("B", 3)]), trace_output(identity_map([("K", 4), ("J", 2)]),
                                                        ["K", "J"]))
        m, n = converse_construct(a, b, decomp)
        assert check_conditions(FactorisationInstance(m, n)).ok

    def test_composite_matches(self, rng):
        decomp = random_decomposition([(2, 1), (1, 2)], rng)
        a = random_cptp([("I", 2), ("K", 4)], [("A", 2)], rng, n_kraus=8)
        b = random_cp([("K", 4), ("J", 2)], [("B", 2)], rng, n_kraus=3)
        m, n = converse_construct(a, b, decomp)
        assert check_conditions(FactorisationInstance(m, n)).ok
        h = m.in_layout
        dmap = build_doubling_map(decomp, "K", ("K'", "K''"))
        ref = compose(dmap, identity_map(h))
        ref = compose(relabel(a, {"K": "K'"}), ref)
        ref = compose(relabel(b, {"K": "K''"}), ref)
        assert choi_distance(compose(n, m), ref) <= 1e-10

    def test_a_must_be_tp(self, rng):
        decomp = random_decomposition([(2, 2)], rng)
        a = random_cp([("I", 2), ("K", 4)], [("A", 2)], rng, scale=3)
        b = random_cptp([("K", 4), ("J", 2)], [("B", 2)], rng, n_kraus=8)
        with pytest.raises(PreconditionError):
            converse_construct(a, b, decomp)
