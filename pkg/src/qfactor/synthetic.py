"""Seeded random instances: states, maps, block decompositions, converse instances."""
from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .algebra import Block, BlockDecomposition
from .cpmaps import CPMap
from .factorise import FactorisationInstance, converse_construct
from .tensor import SystemLayout

# block structures for K = C^4 used across tests and the acceptance suite
K4_STRUCTURES = ([(4, 1)], [(2, 2)], [(2, 1), (1, 2)], [(1, 1)] * 4)


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def random_unitary(d: int, rng=None) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(d, random_state=_rng(rng))


def random_state(d: int, rng=None, rank: int | None = None) -> np.ndarray:
    """Density matrix from a Ginibre matrix of the given rank (full rank by default)."""
    rng = _rng(rng)
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_cptp(in_layout, out_layout, rng=None, n_kraus: int = 2) -> CPMap:
    """Random channel: Stinespring isometry cut from a Haar unitary."""
    rng = _rng(rng)
    in_layout, out_layout = SystemLayout.of(in_layout), SystemLayout.of(out_layout)
    d_in, d_out = in_layout.total_dim, out_layout.total_dim
    big = max(d_in, d_out * n_kraus)
    v = random_unitary(big, rng)[:d_out * n_kraus, :d_in]
    if d_out * n_kraus < d_in:
        raise ValueError("need d_out * n_kraus >= d_in for an isometry")
    return CPMap(v.reshape(d_out, n_kraus, d_in).transpose(1, 0, 2), in_layout, out_layout)


def random_cp(in_layout, out_layout, rng=None, n_kraus: int = 2, scale: float = 1.0) -> CPMap:
    """Random CP map with Gaussian Kraus operators (not trace preserving)."""
    rng = _rng(rng)
    in_layout, out_layout = SystemLayout.of(in_layout), SystemLayout.of(out_layout)
    shape = (n_kraus, out_layout.total_dim, in_layout.total_dim)
    ops = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return CPMap(scale * ops / np.sqrt(2 * in_layout.total_dim * n_kraus), in_layout, out_layout)


def random_decomposition(dims, rng=None) -> BlockDecomposition:
    """Blocks ``dims = [(dA, dB), ...]`` in a Haar-random basis."""
    rng = _rng(rng)
    d = sum(a * b for a, b in dims)
    u = random_unitary(d, rng)
    blocks, off = [], 0
    for a, b in dims:
        blocks.append(Block(a, b, u[:, off:off + a * b]))
        off += a * b
    return BlockDecomposition(tuple(blocks), d)


def random_block_dims(d: int, rng=None, max_blocks: int = 3) -> list:
    """Random partition of ``d`` into blocks ``dA * dB``."""
    rng = _rng(rng)
    dims, left = [], d
    while left:
        if len(dims) == max_blocks - 1:
            size = left
        else:
            size = int(rng.integers(1, left + 1))
        divisors = [a for a in range(1, size + 1) if size % a == 0]
        a = int(rng.choice(divisors))
        dims.append((a, size // a))
        left -= size
    return dims


def converse_instance(dims, rng=None, d_i: int = 2, d_j: int = 2, d_a: int = 2,
                      d_b: int = 2, tp_b: bool = True) -> FactorisationInstance:
    """Instance built from random local maps ``a``, ``b`` and a random decomposition."""
    rng = _rng(rng)
    decomp = random_decomposition(dims, rng)
    d_k = decomp.ambient_dim
    a = random_cptp([("I", d_i), ("K", d_k)], [("A", d_a)], rng, n_kraus=max(2, d_i * d_k))
    b_layout = [("K", d_k), ("J", d_j)]
    if tp_b:
        b = random_cptp(b_layout, [("B", d_b)], rng, n_kraus=max(2, d_j * d_k))
    else:
        b = random_cp(b_layout, [("B", d_b)], rng, n_kraus=3)
    m, n = converse_construct(a, b, decomp)
    return FactorisationInstance(m, n)


def _three_factor_decomposition(dims3, rng):
    """Random decomposition whose blocks are ``K_1^z (x) K_2^z (x) K_3^z``."""
    sizes = [(k1 * k2 * k3,) for k1, k2, k3 in dims3]
    d = sum(s[0] for s in sizes)
    u = random_unitary(d, rng)
    out, off = [], 0
    for (k1, k2, k3), (size,) in zip(dims3, sizes):
        out.append(((k1, k2, k3), u[:, off:off + size].reshape(d, k1, k2, k3)))
        off += size
    return d, out


def _stage_decomposition(blocks3, t: int, d: int) -> BlockDecomposition:
    """Regroup three-factor blocks as ``K_t^z (x) (other factors)``."""
    out = []
    for dims, u in blocks3:
        others = [n for n in range(3) if n != t]
        perm = [0, 1 + t] + [1 + n for n in others]
        v = u.transpose(perm).reshape(d, -1)
        d_a = dims[t]
        out.append(Block(d_a, v.shape[1] // d_a, v))
    return BlockDecomposition(tuple(out), d)


def controlled_unitary(control_dim: int, u: np.ndarray) -> np.ndarray:
    """``|0><0| (x) id + sum_{c >= 1} |c><c| (x) u`` on ``control (x) target``."""
    d = u.shape[0]
    out = np.zeros((control_dim * d, control_dim * d), dtype=complex)
    for c in range(control_dim):
        out[c * d:(c + 1) * d, c * d:(c + 1) * d] = np.eye(d) if c == 0 else u
    return out


def multi_converse_maps(dims3, rng=None, d_i: int = 2, d_a: int = 2,
                        signalling_stage: int | None = None) -> list:
    """Three maps ``M_t = (a_t (x) id) o D^(t)`` sharing a three-factor block structure.

    ``D^(t)`` sends ``K_t^z`` to the party and keeps the other two factors in
    ``K``. With ``signalling_stage = t`` the map ``M_t`` is preceded by a
    controlled flip, controlled by ``I_t``, of the third factor of the first
    block. That factor is read later in the chain, so the chain condition fails
    at stage ``t``.
    """
    from .cpmaps import compose, identity_map, permute_output, relabel, unitary_map
    from .doubling import build_doubling_map

    rng = _rng(rng)
    d, blocks3 = _three_factor_decomposition(dims3, rng)
    maps = []
    for t in range(3):
        i_lab, a_lab = f"I{t + 1}", f"A{t + 1}"
        decomp = _stage_decomposition(blocks3, t, d)
        dmap = build_doubling_map(decomp, "K", ("K'", "K''"))
        a = random_cptp([(i_lab, d_i), ("K'", d)], [(a_lab, d_a)], rng, n_kraus=d_i * d)
        h = SystemLayout(((i_lab, d_i), ("K", d)))
        m = compose(dmap, identity_map(h))
        m = compose(a, m)
        m = relabel(m, {"K''": "K"})
        if signalling_stage == t + 1:
            (k1, k2, k3), u = blocks3[0]
            flip = np.kron(np.eye(k1 * k2), np.roll(np.eye(k3), 1, axis=0))
            x_k = np.eye(d, dtype=complex)
            basis = u.reshape(d, -1)
            x_k += basis @ (flip - np.eye(k1 * k2 * k3)) @ basis.conj().T
            m = compose(m, unitary_map(controlled_unitary(d_i, x_k), h))
        maps.append(permute_output(m, [a_lab, "K"]))
    return maps


def random_povm(d: int, n_outcomes: int, rng=None) -> list:
    """``n_outcomes`` PSD effects on ``C^d`` summing to the identity."""
    rng = _rng(rng)
    effects = [random_state(d, rng) for _ in range(n_outcomes)]
    vals, vecs = np.linalg.eigh(sum(effects))
    inv_root = (vecs / np.sqrt(vals)) @ vecs.conj().T
    return [inv_root @ e @ inv_root for e in effects]


def random_commuting_families(d_a: int, d_b: int, rng=None, n_settings: int = 2,
                              n_outcomes: int = 2) -> tuple:
    """POVM families ``U (X (x) id) U^dag`` and ``U (id (x) Y) U^dag`` for a Haar ``U``."""
    rng = _rng(rng)
    u = random_unitary(d_a * d_b, rng)
    x = [[u @ np.kron(e, np.eye(d_b)) @ u.conj().T for e in random_povm(d_a, n_outcomes, rng)]
         for _ in range(n_settings)]
    y = [[u @ np.kron(np.eye(d_a), e) @ u.conj().T for e in random_povm(d_b, n_outcomes, rng)]
         for _ in range(n_settings)]
    return x, y
