"""Von Neumann entropy and conditional mutual information (base-2 by default)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LayoutError, StateError
from .tensor import Operator, herm_eig, partial_trace_keep

EPS_CMI = 1e-9
EIG_FLOOR = 1e-12
NEG_CLAMP = 1e-9
TRACE_TOL = 1e-9


@dataclass(frozen=True)
class Partition:
    """Three disjoint label groups ``A : B | C`` covering a layout."""

    a: tuple
    b: tuple
    c: tuple = ()

    def __post_init__(self):
        groups = [tuple(self.a), tuple(self.b), tuple(self.c)]
        flat = [lab for g in groups for lab in g]
        if len(set(flat)) != len(flat):
            raise LayoutError(f"partition groups overlap: {groups}")
        object.__setattr__(self, "a", groups[0])
        object.__setattr__(self, "b", groups[1])
        object.__setattr__(self, "c", groups[2])

    def labels(self) -> set:
        return set(self.a) | set(self.b) | set(self.c)


def _state_spectrum(rho) -> np.ndarray:
    mat = rho.matrix if isinstance(rho, Operator) else np.asarray(rho, dtype=complex)
    ev = herm_eig(mat).eigenvalues
    if abs(ev.sum() - 1.0) > TRACE_TOL:
        raise StateError(f"trace {ev.sum():.12g} differs from 1")
    if ev.size and ev[-1] < -NEG_CLAMP:
        raise StateError(f"negative eigenvalue {ev[-1]:.3e}")
    return ev


def vn_entropy(rho, base: float = 2.0) -> float:
    """``-tr rho log rho``; eigenvalues below ``1e-12`` contribute nothing."""
    ev = _state_spectrum(rho)
    ev = ev[ev > EIG_FLOOR]
    return float(max(-np.sum(ev * np.log(ev)) / np.log(base), 0.0))


def cond_mutual_info(rho: Operator, part: Partition, base: float = 2.0) -> float:
    """``I(A:B|C) = H(AC) + H(BC) - H(ABC) - H(C)``."""
    if part.labels() != set(rho.row.labels):
        raise LayoutError(f"partition {part} does not cover {rho.row}")
    _state_spectrum(rho.matrix)

    def h(labels):
        if not labels:
            return 0.0
        return vn_entropy(partial_trace_keep(rho, labels), base)

    a, b, c = list(part.a), list(part.b), list(part.c)
    return h(a + c) + h(b + c) - h(a + b + c) - h(c)
