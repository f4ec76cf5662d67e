"""Dense complex linear algebra on labeled tensor-product systems.

Index convention: row-major, leftmost factor most significant. A layout
``[("A", 2), ("B", 3)]`` orders basis vectors as ``|a>|b> -> 3*a + b``,
which is what ``numpy.kron`` and ``ndarray.reshape`` produce.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, HermiticityError, LayoutError

ETA_EIG = 1e-10
CLUSTER_GAP = 1e-8


def herm_tolerance(matrix: np.ndarray) -> float:
    """Hermiticity tolerance ``1e-10 * (1 + ||M||_max)``."""
    scale = np.max(np.abs(matrix)) if matrix.size else 0.0
    return 1e-10 * (1.0 + scale)


@dataclass(frozen=True)
class SystemLayout:
    """Ordered sequence of ``(label, dim)`` factors."""

    factors: tuple = ()

    def __post_init__(self):
        facs = []
        for item in self.factors:
            label, dim = item
            if not isinstance(label, str) or not label:
                raise LayoutError(f"invalid factor label {label!r}")
            if int(dim) != dim or dim < 1:
                raise DimensionError(f"factor {label!r} has invalid dimension {dim!r}")
            facs.append((label, int(dim)))
        labels = [f[0] for f in facs]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in layout {labels}")
        object.__setattr__(self, "factors", tuple(facs))

    @classmethod
    def of(cls, *factors) -> "SystemLayout":
        """``SystemLayout.of(("A", 2), ("B", 3))``; also accepts a mapping or layout."""
        if len(factors) == 1 and isinstance(factors[0], SystemLayout):
            return factors[0]
        if len(factors) == 1 and isinstance(factors[0], Mapping):
            return cls(tuple(factors[0].items()))
        if len(factors) == 1 and factors[0] and not isinstance(factors[0][0], str):
            return cls(tuple(factors[0]))
        return cls(tuple(factors))

    @property
    def labels(self) -> tuple:
        return tuple(f[0] for f in self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(f[1] for f in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def __len__(self):
        return len(self.factors)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"label {label!r} not in layout {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.factors[self.index(label)][1]

    def select(self, labels: Iterable[str]) -> "SystemLayout":
        return SystemLayout(tuple((lab, self.dim_of(lab)) for lab in labels))

    def without(self, labels: Iterable[str]) -> "SystemLayout":
        drop = set(labels)
        for lab in drop:
            self.index(lab)
        return SystemLayout(tuple(f for f in self.factors if f[0] not in drop))

    def relabel(self, mapping: Mapping[str, str]) -> "SystemLayout":
        return SystemLayout(tuple((mapping.get(lab, lab), d) for lab, d in self.factors))

    def tilde(self) -> "SystemLayout":
        """Mirror layout used for the reference half of the maximally entangled state."""
        return self.relabel({lab: lab + "~" for lab in self.labels})

    def __add__(self, other: "SystemLayout") -> "SystemLayout":
        return SystemLayout(self.factors + SystemLayout.of(other).factors)

    def __str__(self):
        return "(" + ", ".join(f"{lab}:{d}" for lab, d in self.factors) + ")"


def _as_layout(layout) -> SystemLayout:
    if isinstance(layout, SystemLayout):
        return layout
    return SystemLayout.of(layout)


@dataclass(frozen=True)
class Operator:
    """Complex matrix whose rows and columns carry system layouts."""

    matrix: np.ndarray
    row: SystemLayout
    col: SystemLayout = None
    hermitian: bool = field(default=False, compare=False)

    def __post_init__(self):
        row = _as_layout(self.row)
        col = row if self.col is None else _as_layout(self.col)
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim == 0:
            mat = mat.reshape(1, 1)
        if mat.shape != (row.total_dim, col.total_dim):
            raise LayoutError(
                f"matrix shape {mat.shape} does not match layouts {row} x {col}")
        if self.hermitian:
            if row != col or np.max(np.abs(mat - mat.conj().T), initial=0.0) > herm_tolerance(mat):
                raise HermiticityError("operator flagged Hermitian is not")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "row", row)
        object.__setattr__(self, "col", col)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_square(self) -> bool:
        return self.row == self.col

    @property
    def layout(self) -> SystemLayout:
        if not self.is_square:
            raise LayoutError("operator has different row and column layouts")
        return self.row

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.col, self.row)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def __add__(self, other: "Operator") -> "Operator":
        other = align(other, self)
        return Operator(self.matrix + other.matrix, self.row, self.col)

    def __sub__(self, other: "Operator") -> "Operator":
        other = align(other, self)
        return Operator(self.matrix - other.matrix, self.row, self.col)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.matrix * scalar, self.row, self.col)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.col.labels != other.row.labels or self.col.dims != other.row.dims:
            raise LayoutError(f"cannot multiply {self.col} by {other.row}")
        return Operator(self.matrix @ other.matrix, self.row, other.col)


@dataclass(frozen=True)
class Eigensystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T

    def clusters(self, gap: float = CLUSTER_GAP):
        """Index groups of eigenvalues separated by more than ``gap``."""
        return cluster_sorted(self.eigenvalues, gap)


def cluster_sorted(values: np.ndarray, gap: float) -> list:
    groups, current = [], [0] if len(values) else []
    for n in range(1, len(values)):
        if abs(values[n - 1] - values[n]) > gap:
            groups.append(current)
            current = []
        current.append(n)
    if current:
        groups.append(current)
    return groups


def identity(layout) -> Operator:
    layout = _as_layout(layout)
    return Operator(np.eye(layout.total_dim), layout)


def maximally_mixed(layout) -> Operator:
    layout = _as_layout(layout)
    return Operator(np.eye(layout.total_dim) / layout.total_dim, layout)


def kron(a: Operator, b: Operator) -> Operator:
    """Tensor product; layouts are concatenated left to right."""
    return Operator(np.kron(a.matrix, b.matrix), a.row + b.row, a.col + b.col)


def _trace_axes(matrix, row: SystemLayout, col: SystemLayout, labels):
    keep_r = [n for n, lab in enumerate(row.labels) if lab not in labels]
    keep_c = [n for n, lab in enumerate(col.labels) if lab not in labels]
    tr_r = [row.index(lab) for lab in labels]
    tr_c = [col.index(lab) for lab in labels]
    for lab in labels:
        if row.dim_of(lab) != col.dim_of(lab):
            raise LayoutError(f"traced factor {lab!r} differs between rows and columns")
    t = matrix.reshape(row.dims + col.dims)
    nr = len(row)
    t = t.transpose(keep_r + tr_r + [nr + n for n in keep_c] + [nr + n for n in tr_c])
    dr = int(np.prod([row.dims[n] for n in keep_r], dtype=np.int64))
    dc = int(np.prod([col.dims[n] for n in keep_c], dtype=np.int64))
    dt = int(np.prod([row.dims[n] for n in tr_r], dtype=np.int64))
    out = np.einsum("itjt->ij", t.reshape(dr, dt, dc, dt))
    return out, SystemLayout(tuple(row.factors[n] for n in keep_r)), \
        SystemLayout(tuple(col.factors[n] for n in keep_c))


def partial_trace(op: Operator, labels: Iterable[str]) -> Operator:
    """Trace out the named factors. Tracing everything leaves a 1x1 operator."""
    labels = list(dict.fromkeys(labels))
    for lab in labels:
        if lab not in op.row or lab not in op.col:
            raise LayoutError(f"cannot trace {lab!r}: not in {op.row} / {op.col}")
    mat, row, col = _trace_axes(op.matrix, op.row, op.col, labels)
    return Operator(mat, row, col)


def partial_trace_keep(op: Operator, labels: Iterable[str]) -> Operator:
    """Trace out everything except ``labels``; the result keeps ``labels`` order."""
    labels = list(labels)
    traced = [lab for lab in op.row.labels if lab not in labels]
    return permute_systems(partial_trace(op, traced), labels)


def _perm_indices(layout: SystemLayout, perm: Sequence[str]):
    perm = list(perm)
    if sorted(perm) != sorted(layout.labels) or len(set(perm)) != len(perm):
        raise LayoutError(f"{perm} is not a permutation of {layout.labels}")
    return [layout.index(lab) for lab in perm]


def permute_systems(op: Operator, perm: Sequence[str]) -> Operator:
    """Reorder factors to the label order ``perm`` on rows and columns."""
    pr = _perm_indices(op.row, perm)
    pc = _perm_indices(op.col, perm)
    nr = len(op.row)
    t = op.matrix.reshape(op.row.dims + op.col.dims)
    t = t.transpose(pr + [nr + n for n in pc])
    row = SystemLayout(tuple(op.row.factors[n] for n in pr))
    col = SystemLayout(tuple(op.col.factors[n] for n in pc))
    return Operator(t.reshape(row.total_dim, col.total_dim), row, col)


def align(op: Operator, like: Operator) -> Operator:
    """Permute ``op`` so its factor order matches ``like``."""
    if op.row.labels == like.row.labels and op.col.labels == like.col.labels:
        return op
    return permute_systems(op, like.row.labels)


def herm_eig(op) -> Eigensystem:
    """Eigendecomposition of a Hermitian operator, eigenvalues descending."""
    mat = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    if mat.shape[0] != mat.shape[1]:
        raise HermiticityError("non-square matrix")
    if np.max(np.abs(mat - mat.conj().T), initial=0.0) > herm_tolerance(mat):
        raise HermiticityError("matrix is not Hermitian within tolerance")
    w, u = np.linalg.eigh((mat + mat.conj().T) / 2)
    return Eigensystem(w[::-1].copy(), u[:, ::-1].copy())


def psd_sqrt(mat: np.ndarray, clamp: float = 1e-10) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues in ``[-clamp, 0)`` count as zero."""
    es = herm_eig(mat)
    if es.eigenvalues.size and es.eigenvalues[-1] < -clamp:
        raise HermiticityError(f"matrix has negative eigenvalue {es.eigenvalues[-1]:.3e}")
    root = np.sqrt(np.clip(es.eigenvalues, 0.0, None))
    u = es.eigenvectors
    return (u * root) @ u.conj().T


def max_entangled(d: int, labels=("H", "H~")) -> Operator:
    """Projector onto ``(1/sqrt d) sum_i |i>|i>``."""
    if int(d) != d or d < 1:
        raise DimensionError(f"dimension must be a positive integer, got {d!r}")
    vec = np.eye(d).reshape(-1) / np.sqrt(d)
    layout = SystemLayout(((labels[0], d), (labels[1], d)))
    return Operator(np.outer(vec, vec), layout)


def max_entangled_layout(layout) -> Operator:
    """Maximally entangled state between ``layout`` and ``layout.tilde()``.

    The reference factors come after all system factors, so the state is the
    product of per-factor maximally entangled states up to that reordering.
    """
    layout = _as_layout(layout)
    d = layout.total_dim
    vec = np.eye(d).reshape(-1) / np.sqrt(d)
    return Operator(np.outer(vec, vec.conj()), layout + layout.tilde())


def trace_norm(mat) -> float:
    mat = mat.matrix if isinstance(mat, Operator) else np.asarray(mat)
    if mat.shape[0] == mat.shape[1] and np.allclose(mat, mat.conj().T, atol=1e-13):
        return float(np.sum(np.abs(np.linalg.eigvalsh((mat + mat.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(mat, compute_uv=False)))


def op_norm(mat) -> float:
    mat = mat.matrix if isinstance(mat, Operator) else np.asarray(mat)
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def act_on_rows(matrix: np.ndarray, layout: SystemLayout, labels: Sequence[str],
                op: np.ndarray, out_layout: SystemLayout):
    """Left-multiply ``matrix`` by ``op`` acting on the factors ``labels``.

    ``op`` maps ``layout.select(labels)`` to ``out_layout``; the identity acts on
    the remaining factors. The output factors are inserted where the first
    input factor sat (at the front if ``labels`` is empty). Returns the new
    matrix and its row layout.
    """
    labels = list(labels)
    ncols = matrix.shape[1]
    pos = [layout.index(lab) for lab in labels]
    rest = [n for n in range(len(layout)) if n not in pos]
    rest_fac = [layout.factors[n] for n in rest]
    clash = set(out_layout.labels) & {f[0] for f in rest_fac}
    if clash:
        raise LayoutError(f"output labels {sorted(clash)} collide with untouched factors")
    d_in = int(np.prod([layout.dims[n] for n in pos], dtype=np.int64))
    if op.shape != (out_layout.total_dim, d_in):
        raise LayoutError(f"operator of shape {op.shape} cannot map {d_in} -> {out_layout.total_dim}")
    t = matrix.reshape(layout.dims + (ncols,))
    t = t.transpose(pos + rest + [len(layout)])
    t = op @ t.reshape(d_in, -1)
    insert = sum(1 for n in rest if n < min(pos)) if pos else 0
    new_fac = rest_fac[:insert] + list(out_layout.factors) + rest_fac[insert:]
    n_out = len(out_layout)
    t = t.reshape(out_layout.dims + tuple(f[1] for f in rest_fac) + (ncols,))
    order = list(range(n_out, n_out + insert)) + list(range(n_out)) + \
        list(range(n_out + insert, n_out + len(rest_fac))) + [n_out + len(rest_fac)]
    t = t.transpose(order)
    new_layout = SystemLayout(tuple(new_fac))
    return t.reshape(new_layout.total_dim, ncols), new_layout
