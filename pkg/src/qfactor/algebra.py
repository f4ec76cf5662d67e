"""Finite-dimensional *-algebras and the block structure of quantum Markov states.

A state with vanishing conditional mutual information ``I(A:B|C)`` splits the
conditioning system as ``C = (+)_z C_A^z (x) C_B^z`` with

    rho_ABC = sum_z p_z rho^z_{A C_A^z} (x) rho^z_{C_B^z B}.

:func:`markov_decomposition` finds this structure constructively. The
A-side conditional operators of ``rho_AC`` generate a matrix algebra on ``C``
whose block decomposition (center, then matrix units inside each block) yields
the split.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .entropic import EPS_CMI, Partition, cond_mutual_info
from .errors import LayoutError, NotAnAlgebraError, NotMarkovError, StructureError
from .tensor import (CLUSTER_GAP, Operator, SystemLayout, cluster_sorted, herm_eig,
                     partial_trace, permute_systems, trace_norm)

EPS_ALG = 1e-9
EPS_RECON = 1e-8
ZERO_WEIGHT = 1e-12
SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class MatrixAlgebra:
    """Unital *-closed subalgebra of ``d x d`` matrices.

    ``basis`` has shape ``(n, d, d)`` and is orthonormal for the
    Hilbert-Schmidt inner product ``<X, Y> = tr(X^dag Y)``.
    """

    dim: int
    basis: np.ndarray

    @property
    def size(self) -> int:
        return self.basis.shape[0]

    def project(self, x: np.ndarray) -> np.ndarray:
        flat = self.basis.reshape(self.size, -1)
        coeff = flat.conj() @ x.reshape(-1)
        return (coeff @ flat).reshape(self.dim, self.dim)

    def closure_residual(self) -> float:
        """Largest distance of a pairwise product or adjoint from the span."""
        flat = self.basis.reshape(self.size, -1)
        worst = 0.0
        for b in self.basis:
            prods = np.concatenate([np.einsum("ij,njk->nik", b, self.basis),
                                    b.conj().T[None]]).reshape(-1, self.dim ** 2)
            resid = prods - (prods @ flat.conj().T) @ flat
            worst = max(worst, float(np.max(np.linalg.norm(resid, axis=1))))
        return worst


@dataclass(frozen=True)
class Block:
    d_a: int
    d_b: int
    isometry: np.ndarray

    @property
    def size(self) -> int:
        return self.d_a * self.d_b


@dataclass(frozen=True)
class BlockDecomposition:
    """``C^d = (+)_z C^{dA_z} (x) C^{dB_z}`` with isometries ``U_z``.

    Column ``a * dB_z + b`` of ``U_z`` is the image of ``|a>|b>``.
    """

    blocks: tuple
    ambient_dim: int

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        total = sum(b.size for b in self.blocks)
        if total != self.ambient_dim:
            raise StructureError(
                f"block sizes sum to {total}, ambient dimension is {self.ambient_dim}")
        for z, b in enumerate(self.blocks):
            if b.isometry.shape != (self.ambient_dim, b.size):
                raise StructureError(f"isometry of block {z} has shape {b.isometry.shape}",
                                     block=z)

    @property
    def dims(self) -> list:
        return [(b.d_a, b.d_b) for b in self.blocks]

    def stacked(self) -> np.ndarray:
        """All isometries side by side: a unitary on ``C^d``."""
        return np.concatenate([b.isometry for b in self.blocks], axis=1)

    def isometry_residual(self) -> float:
        u = self.stacked()
        return float(np.max(np.abs(u.conj().T @ u - np.eye(self.ambient_dim)), initial=0.0))

    def projector(self, z: int) -> np.ndarray:
        u = self.blocks[z].isometry
        return u @ u.conj().T

    def conj(self) -> "BlockDecomposition":
        """Entrywise complex conjugate of every isometry."""
        return BlockDecomposition(
            tuple(Block(b.d_a, b.d_b, b.isometry.conj()) for b in self.blocks),
            self.ambient_dim)


@dataclass(frozen=True)
class MarkovStructure:
    """Output of :func:`markov_decomposition`.

    ``block_index[k]`` is the position in ``decomposition.blocks`` of the k-th
    retained block; ``states_a[k]`` lives on ``A + (ca_label,)`` and
    ``states_b[k]`` on ``(cb_label,) + B``.
    """

    decomposition: BlockDecomposition
    block_index: tuple
    weights: np.ndarray
    states_a: tuple
    states_b: tuple
    residual: float
    cmi: float = field(default=0.0)


# ---------------------------------------------------------------------------


def conditional_operators(rho: Operator, a_labels: Sequence[str],
                          c_labels: Sequence[str] | None = None) -> np.ndarray:
    """``O_ij = (<i|_A (x) id) rho (|j>_A (x) id)`` stacked as ``(dA, dA, dC, dC)``."""
    a_labels = list(a_labels)
    for lab in a_labels:
        if lab not in rho.row:
            raise LayoutError(f"label {lab!r} not in {rho.row}")
    if c_labels is None:
        c_labels = [lab for lab in rho.row.labels if lab not in a_labels]
    c_labels = list(c_labels)
    op = permute_systems(rho, a_labels + c_labels)
    d_a = op.row.select(a_labels).total_dim
    d_c = op.row.select(c_labels).total_dim
    return op.matrix.reshape(d_a, d_c, d_a, d_c).transpose(0, 2, 1, 3).copy()


def generate_algebra(gens, tol: float = EPS_ALG, dim: int | None = None) -> MatrixAlgebra:
    """Smallest unital *-algebra containing ``gens`` (Gram-Schmidt closure)."""
    gens = [g.matrix if isinstance(g, Operator) else np.asarray(g, dtype=complex)
            for g in gens]
    if dim is None:
        if not gens:
            raise ValueError("need generators or an explicit dimension")
        dim = gens[0].shape[0]
    d = dim
    cap = d * d
    basis: list = []

    def add(x):
        if len(basis) >= cap:
            return
        norm = np.linalg.norm(x)
        if norm <= tol:
            return
        r = x / norm
        if basis:
            mat = np.array(basis)
            for _ in range(2):
                r = r - np.tensordot(np.tensordot(mat.conj(), r, axes=([1, 2], [0, 1])),
                                     mat, axes=(0, 0))
        nr = np.linalg.norm(r)
        if nr > tol:
            basis.append(r / nr)

    add(np.eye(d))
    for g in gens:
        if g.shape != (d, d):
            raise LayoutError(f"generator of shape {g.shape} in dimension {d}")
        add(g)
        add(g.conj().T)
    i = 0
    while i < len(basis) and len(basis) < cap:
        x = basis[i]
        add(x.conj().T)
        j = 0
        while j < len(basis) and len(basis) < cap:
            add(x @ basis[j])
            add(basis[j] @ x)
            j += 1
        i += 1
    return MatrixAlgebra(d, np.array(basis))


def _span_rank(mats: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(mats.reshape(mats.shape[0], -1), compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))


def _center(alg: MatrixAlgebra, tol: float) -> np.ndarray:
    """Basis of the center as ``(m, d, d)``."""
    n, d = alg.size, alg.dim
    gram = np.zeros((n, n), dtype=complex)
    for b in alg.basis:
        comm = np.einsum("nij,jk->nik", alg.basis, b) - np.einsum("ij,njk->nik", b, alg.basis)
        flat = comm.reshape(n, -1)
        gram += flat.conj() @ flat.T
    w, v = np.linalg.eigh((gram + gram.conj().T) / 2)
    null = v[:, w <= tol * max(1.0, w[-1])]
    return np.tensordot(null.T, alg.basis, axes=(1, 0))


def _phase_fix(vec: np.ndarray) -> complex:
    """Phase that makes the largest-magnitude entry of ``vec`` real positive."""
    k = int(np.argmax(np.abs(vec) - 1e-12 * np.arange(len(vec))))
    return np.conj(vec[k]) / abs(vec[k])


def _random_hermitian(mats: np.ndarray, rng) -> np.ndarray:
    coeff = rng.standard_normal(len(mats))
    x = np.tensordot(coeff, mats, axes=(0, 0))
    x = x + x.conj().T
    norm = np.linalg.norm(x)
    return x / norm if norm > 0 else x


def _split_block(alg_basis: np.ndarray, v: np.ndarray, rng, tol: float):
    """Matrix-unit basis for one central block with range ``v`` (``d x r``)."""
    r = v.shape[1]
    restricted = np.einsum("ia,nij,jb->nab", v.conj(), alg_basis, v)
    m = _span_rank(restricted, 1e-8)
    d_a = int(round(np.sqrt(m)))
    if d_a * d_a != m or r % d_a:
        raise NotAnAlgebraError(
            f"central block of rank {r} carries an algebra of dimension {m}")
    d_b = r // d_a
    if d_a == 1:
        es = herm_eig(np.eye(r) + 0j)
        basis = es.eigenvectors
    else:
        es = herm_eig(_random_hermitian(restricted, rng))
        groups = cluster_sorted(es.eigenvalues, CLUSTER_GAP)
        if len(groups) != d_a or any(len(g) != d_b for g in groups):
            raise NotAnAlgebraError(
                f"expected {d_a} eigenprojections of rank {d_b}, found "
                f"{[len(g) for g in groups]}")
        proj = [es.eigenvectors[:, g] @ es.eigenvectors[:, g].conj().T for g in groups]
        f_first = es.eigenvectors[:, groups[0]]
        y = np.tensordot(rng.standard_normal(len(restricted))
                         + 1j * rng.standard_normal(len(restricted)), restricted, axes=(0, 0))
        units = [proj[0]]
        for a in range(1, d_a):
            t = proj[a] @ y @ proj[0]
            scale = np.linalg.norm(t) / np.sqrt(d_b)
            if scale < 1e-8:
                raise NotAnAlgebraError("degenerate matrix unit; retry with another seed")
            units.append(t / scale)
        basis = np.concatenate([t @ f_first for t in units], axis=1)
    cols = (v @ basis).reshape(v.shape[0], d_a, d_b)
    for b in range(d_b):
        cols[:, :, b] *= _phase_fix(cols[:, 0, b])
    for a in range(1, d_a):
        cols[:, a, :] *= _phase_fix(cols[:, a, 0])
    u = cols.reshape(v.shape[0], r)
    # sanity check: algebra elements act as x (x) id in this basis
    local = np.einsum("ia,nij,jb->nab", u.conj(), alg_basis, u)
    t = local.reshape(-1, d_a, d_b, d_a, d_b)
    red = np.einsum("nabcb->nac", t) / d_b
    resid = np.max(np.abs(local - np.einsum("nac,bd->nabcd", red, np.eye(d_b)).reshape(local.shape)))
    if resid > 1e-7:
        raise NotAnAlgebraError(f"block basis does not factorise the algebra (residual {resid:.2e})")
    return Block(d_a, d_b, u)


def _sort_blocks(blocks: list) -> list:
    def key(b):
        diag = np.sum(np.abs(b.isometry) ** 2, axis=1)
        first = int(np.argmax(diag > 1e-8))
        return (-b.d_a, -b.d_b, first)
    return sorted(blocks, key=key)


def decompose(alg: MatrixAlgebra, tol: float = EPS_ALG, seed: int = 0, rng=None,
              check_closure: bool = True) -> BlockDecomposition:
    """Wedderburn decomposition ``alg = (+)_z L(C^{dA_z}) (x) id_{dB_z}``."""
    if check_closure:
        resid = alg.closure_residual()
        if resid > tol:
            raise NotAnAlgebraError(f"closure residual {resid:.2e} exceeds {tol:.1e}")
    rng = np.random.default_rng(seed) if rng is None else rng
    center = _center(alg, tol)
    es = herm_eig(_random_hermitian(center, rng))
    blocks = []
    for group in cluster_sorted(es.eigenvalues, CLUSTER_GAP):
        blocks.append(_split_block(alg.basis, es.eigenvectors[:, group], rng, tol))
    return BlockDecomposition(tuple(_sort_blocks(blocks)), alg.dim)


# ---------------------------------------------------------------------------


def _modular_components(x: np.ndarray, levels: list, logs: np.ndarray) -> list:
    """Split ``x`` (in the eigenbasis of rho_C) into modular frequency components."""
    pairs: dict = {}
    for p, gp in enumerate(levels):
        for q, gq in enumerate(levels):
            freq = logs[p] - logs[q]
            key = next((k for k in pairs if abs(k - freq) <= 1e-8), freq)
            pairs.setdefault(key, []).append((gp, gq))
    comps = []
    for blocks in pairs.values():
        c = np.zeros_like(x)
        for gp, gq in blocks:
            c[np.ix_(gp, gq)] = x[np.ix_(gp, gq)]
        comps.append(c)
    return comps


def markov_generators(rho_ac: Operator, a_labels, c_labels):
    """Generators of the A-side algebra on the support of ``rho_C``.

    Returns ``(gens, support, complement)`` where ``support`` is a ``d x s``
    isometry onto the support of ``rho_C`` (its eigenbasis) and the generators
    are ``s x s`` matrices in that basis.
    """
    ops = conditional_operators(rho_ac, a_labels, c_labels)
    rho_c = np.einsum("iiab->ab", ops)
    es = herm_eig(rho_c)
    keep = es.eigenvalues > SUPPORT_TOL
    lam = es.eigenvalues[keep]
    support = es.eigenvectors[:, keep]
    complement = es.eigenvectors[:, ~keep]
    inv_sqrt = 1.0 / np.sqrt(lam)
    levels = cluster_sorted(lam, CLUSTER_GAP)
    logs = np.array([np.log(lam[g[0]]) for g in levels])
    gens = []
    d_a = ops.shape[0]
    for i in range(d_a):
        for j in range(d_a):
            x = support.conj().T @ ops[i, j] @ support
            x = inv_sqrt[:, None] * x * inv_sqrt[None, :]
            if np.linalg.norm(x) <= 1e-13:
                continue
            gens.extend(c for c in _modular_components(x, levels, logs)
                        if np.linalg.norm(c) > 1e-13)
    return gens, support, complement


def markov_decomposition(rho: Operator, a_labels: Sequence[str], b_labels: Sequence[str],
                         c_labels: Sequence[str], eps_cmi: float = EPS_CMI,
                         eps_recon: float = EPS_RECON, seed: int = 0, rng=None,
                         ca_label: str = "CA", cb_label: str = "CB") -> MarkovStructure:
    """Block structure of a state with ``I(A:B|C) = 0``."""
    a_labels, b_labels, c_labels = list(a_labels), list(b_labels), list(c_labels)
    part = Partition(tuple(a_labels), tuple(b_labels), tuple(c_labels))
    cmi = cond_mutual_info(rho, part)
    if cmi > eps_cmi:
        raise NotMarkovError(cmi, eps_cmi)
    rng = np.random.default_rng(seed) if rng is None else rng
    rho = permute_systems(rho, a_labels + b_labels + c_labels)
    rho_ac = partial_trace(rho, b_labels)
    gens, support, complement = markov_generators(rho_ac, a_labels, c_labels)
    s = support.shape[1]
    alg = generate_algebra(gens, dim=s)
    local = decompose(alg, seed=seed, rng=rng, check_closure=False)
    blocks = [Block(b.d_a, b.d_b, support @ b.isometry) for b in local.blocks]
    if complement.shape[1]:
        blocks.append(Block(1, complement.shape[1], complement))
    d_c = rho.row.select(c_labels).total_dim
    decomposition = BlockDecomposition(tuple(_sort_blocks(blocks)), d_c)

    a_lay = rho.row.select(a_labels)
    b_lay = rho.row.select(b_labels)
    d_a, d_b = a_lay.total_dim, b_lay.total_dim
    t = rho.matrix.reshape(d_a, d_b, d_c, d_a, d_b, d_c)
    recon = np.zeros_like(t)
    kept, weights, states_a, states_b = [], [], [], []
    for z, blk in enumerate(decomposition.blocks):
        u = blk.isometry
        w = np.einsum("ck,xycuvd,dl->xykuvl", u.conj(), t, u)
        w = w.reshape(d_a, d_b, blk.d_a, blk.d_b, d_a, d_b, blk.d_a, blk.d_b)
        p = float(np.real(np.einsum("xyabxyab->", w)))
        if p < ZERO_WEIGHT:
            continue
        sigma = w / p
        rho1 = np.einsum("xyabuycb->xauc", sigma).reshape(d_a * blk.d_a, d_a * blk.d_a)
        rho2 = np.einsum("xyabxvad->bydv", sigma).reshape(blk.d_b * d_b, blk.d_b * d_b)
        prod = np.einsum("xauc,bydv->xyabuvcd",
                         rho1.reshape(d_a, blk.d_a, d_a, blk.d_a),
                         rho2.reshape(blk.d_b, d_b, blk.d_b, d_b))
        n = d_a * d_b * blk.size
        res = trace_norm(sigma.reshape(n, n) - prod.reshape(n, n))
        if res > eps_recon:
            raise StructureError(f"block {z} state is not of product form (residual {res:.2e})",
                                 block=z, residual=res)
        emb = prod.reshape(d_a, d_b, blk.size, d_a, d_b, blk.size)
        recon += p * np.einsum("ck,xykuvl,dl->xycuvd", u, emb, u.conj())
        kept.append(z)
        weights.append(p)
        states_a.append(Operator(rho1, a_lay + SystemLayout(((ca_label, blk.d_a),))))
        states_b.append(Operator(rho2, SystemLayout(((cb_label, blk.d_b),)) + b_lay))
    n = d_a * d_b * d_c
    residual = trace_norm(recon.reshape(n, n) - rho.matrix)
    if residual > eps_recon:
        raise StructureError(f"reconstruction residual {residual:.2e} exceeds {eps_recon:.1e}",
                             residual=residual)
    return MarkovStructure(decomposition, tuple(kept), np.array(weights),
                           tuple(states_a), tuple(states_b), residual, cmi)
