"""The doubling map ``D: K -> K' (x) K''`` attached to a block decomposition.

On block ``z`` with ``K^z = K_A^z (x) K_B^z`` the map sends the ``K_A^z`` factor
to ``K'`` and the ``K_B^z`` factor to ``K''``, padding each output with the
maximally mixed state on the missing factor:

    D(W) = sum_z V_z (P_z W P_z) V_z^dag (x) pi_{K_B'^z} (x) pi_{K_A''^z}.

Everything block-classical is copied to both outputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import BlockDecomposition
from .cpmaps import (CPMap, choi_distance, compose, relabel, tp_residual, trace_output,
                     unital_residual)
from .errors import StructureError
from .tensor import SystemLayout


def build_doubling_map(decomp: BlockDecomposition, k_label: str = "K",
                       out_labels=("K'", "K''")) -> CPMap:
    """Kraus family of the doubling map for ``decomp`` (acting on ``k_label``)."""
    d = decomp.ambient_dim
    if decomp.isometry_residual() > 1e-10:
        raise StructureError("block isometries are not orthonormal")
    ops = []
    for blk in decomp.blocks:
        da, db = blk.d_a, blk.d_b
        u = blk.isometry.reshape(d, da, db)
        norm = 1.0 / np.sqrt(da * db)
        for bp in range(db):
            for app in range(da):
                # sum_{a,b} (u_{a,b'} (x) u_{a'',b}) u_{a,b}^dag
                left = np.einsum("ia,jb->ijab", u[:, :, bp], u[:, app, :]).reshape(d * d, da, db)
                ops.append(norm * np.einsum("xab,yab->xy", left, u.conj()))
    k = SystemLayout(((k_label, d),))
    out = SystemLayout(((out_labels[0], d), (out_labels[1], d)))
    return CPMap(np.array(ops), k, out)


@dataclass(frozen=True)
class DoublingReport:
    tp_residual: float
    property_i: float
    property_ii: float

    def ok(self, tol: float = 1e-10) -> bool:
        return max(self.tp_residual, self.property_i, self.property_ii) <= tol


def verify_doubling_properties(d: CPMap) -> DoublingReport:
    """Residuals of the two structural identities of a doubling map.

    (i)  applying ``D`` again to ``K''`` and discarding the new first copy
         reproduces ``D``;
    (ii) ``tr_{K'} o D`` is unital.
    """
    k1, k2 = d.out_layout.labels
    t1, t2 = k1 + "~", k2 + "~"
    again = relabel(d, {d.in_layout.labels[0]: k2, k1: t1, k2: t2})
    twice = trace_output(compose(again, d), [t1])
    target = relabel(d, {k2: t2})
    prop_i = choi_distance(twice, target)
    prop_ii = unital_residual(trace_output(d, [k1]))
    return DoublingReport(tp_residual(d), prop_i, prop_ii)
