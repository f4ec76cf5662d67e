import numpy as np
import pytest

from qfactor.algebra import Block, BlockDecomposition
from qfactor.cpmaps import CPMap, apply, choi_distance, compose, is_tp, trace_map
from qfactor.doubling import build_doubling_map, verify_doubling_properties
from qfactor.errors import StructureError
from qfactor.synthetic import random_block_dims, random_decomposition, random_state
from qfactor.tensor import Operator, SystemLayout


def single(d_a, d_b):
    d = d_a * d_b
    return BlockDecomposition((Block(d_a, d_b, np.eye(d)),), d)


def test_single_block_a_side(rng):
    dmap = build_doubling_map(single(3, 1))
    w = random_state(3, rng)
    out = apply(dmap, Operator(w, dmap.in_layout))
    assert out.row.labels == ("K'", "K''")
    assert np.allclose(out.matrix, np.kron(w, np.eye(3) / 3), atol=1e-12)


def test_single_block_b_side(rng):
    dmap = build_doubling_map(single(1, 3))
    w = random_state(3, rng)
    out = apply(dmap, Operator(w, dmap.in_layout))
    assert np.allclose(out.matrix, np.kron(np.eye(3) / 3, w), atol=1e-12)


def test_classical_copy():
    blocks = tuple(Block(1, 1, np.eye(2)[:, [z]]) for z in range(2))
    dmap = build_doubling_map(BlockDecomposition(blocks, 2))
    out = apply(dmap, Operator(np.diag([0.25, 0.75]), dmap.in_layout)).matrix
    assert np.allclose(out, np.diag([0.25, 0, 0, 0.75]))


@pytest.mark.parametrize("seed", range(5))
def test_tp_and_trace(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 7))
    dmap = build_doubling_map(random_decomposition(random_block_dims(d, rng), rng))
    assert is_tp(dmap, 1e-10)
    lhs = compose(trace_map(dmap.out_layout), dmap)
    assert choi_distance(lhs, trace_map(dmap.in_layout)) <= 1e-12


def test_single_block_properties_exact():
    for dims in ((3, 1), (1, 3), (2, 2)):
        rep = verify_doubling_properties(build_doubling_map(single(*dims)))
        assert rep.property_i <= 1e-12 and rep.property_ii <= 1e-12


def test_random_decomposition_d6():
    rng = np.random.default_rng(6)
    dmap = build_doubling_map(random_decomposition([(2, 1), (1, 2), (1, 1), (1, 1)], rng))
    rep = verify_doubling_properties(dmap)
    assert rep.ok(1e-10)


def test_corrupted_fails_property_i(rng):
    dmap = build_doubling_map(random_decomposition([(2, 1), (1, 2)], rng))
    ops = dmap.kraus.copy()
    ops[0] *= 1.01
    bad = CPMap(ops, dmap.in_layout, dmap.out_layout)
    assert verify_doubling_properties(bad).property_i > 1e-3


def test_invalid_decomposition():
    iso = np.array([[1.0, 1.0], [0.0, 0.0]])
    decomp = BlockDecomposition((Block(1, 1, iso[:, :1]), Block(1, 1, iso[:, 1:])), 2)
    with pytest.raises(StructureError):
        build_doubling_map(decomp)
