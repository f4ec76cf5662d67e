"""Factorisation of a sequence of operations ``M_t: I_t (x) K -> A_t (x) K``.

The chain ``tr_K o M_s o ... o M_1`` is rewritten as

    (M_bar_1 (x) ... (x) M_bar_s) o D,    M_bar_t = tr_K o M_t,

with ``D: K -> K#1 (x) ... (x) K#s`` a product of two-party doubling maps.
Stage ``t`` is an ordinary two-map factorisation in which ``M_t`` plays the
first map and the remainder of the chain (``M_{t+1}`` to ``M_s``, then
discarding ``K``) plays the second.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cpmaps import (EPS_COND, CPMap, choi_distance, compose, discard_input, identity_map,
                     is_tp, permute_input, permute_output, prepare_input, relabel, relabel_output, sequence_choi,
                     state_map,
                     tp_residual, trace_map, trace_output, unital_residual)
from .doubling import build_doubling_map
from .entropic import EPS_CMI
from .errors import CertificateError, ConditionError, FactorisationImpossible, LayoutError
from .factorise import EPS_FACT, FactorisationCertificate, FactorisationInstance, factorise
from .tensor import SystemLayout


@dataclass(frozen=True)
class MultiFactorisation:
    d: CPMap
    marginals: tuple
    residual: float
    stages: tuple
    cond_residuals: tuple
    unital_residuals: tuple

    @property
    def copy_labels(self) -> tuple:
        return self.d.out_layout.labels


def _io_labels(m: CPMap, k: str):
    ins = [lab for lab in m.in_layout.labels if lab != k]
    outs = [lab for lab in m.out_layout.labels if lab != k]
    if len(ins) != 1 or k not in m.in_layout or k not in m.out_layout:
        raise LayoutError(f"each map must act on (I_t, {k}) and return (A_t, {k})")
    return ins[0], outs


def chain(maps: Sequence[CPMap], k: str = "K", start: int = 0) -> CPMap:
    """``M_s o ... o M_{start+1}`` as a map on ``(I_{start+1}, ..., I_s, K)``."""
    ins = [_io_labels(m, k)[0] for m in maps[start:]]
    layout = SystemLayout(tuple((lab, maps[start + n].in_layout.dim_of(lab))
                                for n, lab in enumerate(ins)) +
                          ((k, maps[0].in_layout.dim_of(k)),))
    out = identity_map(layout)
    for m in maps[start:]:
        out = compose(m, out)
    return out


def _merge(layout: SystemLayout, labels: Sequence[str], new: str) -> SystemLayout:
    """Replace the contiguous factors ``labels`` by one factor ``new``."""
    pos = [layout.index(lab) for lab in labels]
    if pos != list(range(pos[0], pos[0] + len(pos))):
        raise LayoutError("factors to merge must be contiguous")
    dim = int(np.prod([layout.dims[p] for p in pos]))
    facs = list(layout.factors[:pos[0]]) + [(new, dim)] + list(layout.factors[pos[-1] + 1:])
    return SystemLayout(tuple(facs))


def stage_instance(maps: Sequence[CPMap], t: int, k: str = "K") -> FactorisationInstance:
    """Two-map instance for stage ``t`` (1-based): ``H = (I_t, K, J)`` with ``J = I_{t+1..s}``."""
    s = len(maps)
    if not 1 <= t < s:
        raise ValueError(f"stage must lie in 1..{s - 1}")
    i_t, a_t = _io_labels(maps[t - 1], k)
    later = [_io_labels(m, k)[0] for m in maps[t:]]
    j_layout = SystemLayout(tuple((lab, maps[t + n].in_layout.dim_of(lab))
                                  for n, lab in enumerate(later)))
    # M^(t) = (pi_{I_t} o M_t) (x) id_J
    m_t = permute_input(maps[t - 1], [i_t, k])
    m_t = compose(state_map(m_t.in_layout.select([i_t])), m_t)
    m_t = permute_output(m_t, a_t + [i_t, k])
    ops = np.einsum("zij,kl->zikjl", m_t.kraus, np.eye(j_layout.total_dim))
    d_j = j_layout.total_dim
    ops = ops.reshape(m_t.n_kraus, m_t.d_out * d_j, m_t.d_in * d_j)
    out_full = m_t.out_layout + j_layout
    in_full = m_t.in_layout + j_layout
    m_stage = CPMap(ops, in_full, out_full)
    m_stage = CPMap(m_stage.kraus, _merge(in_full, later, "J"), _merge(out_full, later, "J"))
    # N^(t) = tr_K o M_s o ... o M_{t+1} o tr_{I_t}
    rest = trace_output(chain(maps, k, start=t), [k])
    rest = discard_input(rest, m_t.in_layout.select([i_t]))
    rest = permute_input(rest, [i_t, k] + later)
    n_stage = CPMap(rest.kraus, _merge(rest.in_layout, later, "J"), rest.out_layout)
    return FactorisationInstance(m_stage, n_stage, i=i_t, k=k, j="J")


def _input_layout(maps: Sequence[CPMap], k: str) -> SystemLayout:
    ins = [_io_labels(m, k)[0] for m in maps]
    return SystemLayout(tuple((lab, m.in_layout.dim_of(lab)) for lab, m in zip(ins, maps)) +
                        ((k, maps[0].in_layout.dim_of(k)),))


def chain_condition_residual(maps: Sequence[CPMap], t: int, k: str = "K") -> float:
    """Residual of the stage-``t`` no-signalling condition of the chain.

    ``tr_{A_1..A_t} o tr_K o M_s ... M_1`` against
    ``tr_K o M_s ... M_{t+1} o tr_{I_t .. I_1}``.
    """
    layout = _input_layout(maps, k)
    k_lay = layout.select([k])
    early_a = SystemLayout(tuple(f for m in maps[:t]
                                 for f in m.out_layout.select(_io_labels(m, k)[1]).factors))
    early_i = layout.select([_io_labels(m, k)[0] for m in maps[:t]])
    lhs = sequence_choi(layout, *maps, trace_map(k_lay), trace_map(early_a))
    rhs = sequence_choi(layout, trace_map(early_i), *maps[t:], trace_map(k_lay))
    return choi_distance(lhs, rhs)


def stage_unital_residual(m: CPMap, k: str = "K") -> float:
    """``|| tr_{A_t} o M_t(pi_{I_t} (x) id_K) - id_K ||``."""
    i_t, a_t = _io_labels(m, k)
    return unital_residual(trace_output(prepare_input(m, [i_t]), a_t))


def multi_factorise(maps: Sequence[CPMap], k: str = "K", eps_cond: float = EPS_COND,
                    eps_cmi: float = EPS_CMI, eps_fact: float = EPS_FACT,
                    seed: int = 0) -> MultiFactorisation:
    """Factorise ``tr_K o M_s o ... o M_1`` into local marginals and one doubling map.

    Raises
    ------
    ConditionError
        With ``stage = t`` (1-based) for the first map or chain position whose
        unitality or no-signalling condition fails.
    FactorisationImpossible
        With ``stage = t`` if the stage-``t`` Choi state is not Markov.
    """
    maps = list(maps)
    s = len(maps)
    if s < 2:
        raise ValueError("need at least two maps")
    for t, m in enumerate(maps, 1):
        if not is_tp(m, eps_cond):
            raise ConditionError(f"map {t} is not TP (residual {tp_residual(m):.2e})", stage=t)
    unital = tuple(stage_unital_residual(m, k) for m in maps)
    conds = tuple(chain_condition_residual(maps, t, k) for t in range(1, s))
    for t in range(1, s + 1):
        if unital[t - 1] > eps_cond:
            raise ConditionError(f"stage {t}: map is not unital on K", stage=t, failed=["ii"])
        if t < s and conds[t - 1] > eps_cond:
            raise ConditionError(f"stage {t}: chain condition residual {conds[t - 1]:.2e}",
                                 stage=t, failed=["i"])

    d_k = maps[0].in_layout.dim_of(k)
    copies = [f"{k}#{t}" for t in range(1, s + 1)]
    total = identity_map(SystemLayout(((k, d_k),)))
    stages = []
    for t in range(1, s):
        inst = stage_instance(maps, t, k)
        try:
            cert: FactorisationCertificate = factorise(inst, eps_cond, eps_cmi, eps_fact, seed)
        except FactorisationImpossible as exc:
            raise FactorisationImpossible(exc.cmi, stage=t) from exc
        except ConditionError as exc:
            raise ConditionError(str(exc), report=exc.report, stage=t, failed=exc.failed) from exc
        stages.append(cert)
        d_t = build_doubling_map(cert.decomposition, k, (copies[t - 1], k))
        total = compose(d_t, total)
    total = relabel_output(total, {k: copies[-1]})

    marginals = tuple(trace_output(m, [k]) for m in maps)
    layout = _input_layout(maps, k)
    steps = []
    for t, mb in enumerate(marginals, 1):
        if t < s:
            # D^(t) followed by M_bar_t on the copy it hands out: (I_t, K) -> (A_t, K)
            d_t = build_doubling_map(stages[t - 1].decomposition, k, (copies[t - 1], k))
            i_lay = mb.in_layout.without([k])
            step = compose(d_t, identity_map(i_lay + layout.select([k])))
            steps.append(compose(relabel(mb, {k: copies[t - 1]}), step))
        else:
            steps.append(mb)
    composite = sequence_choi(layout, *steps)
    reference = sequence_choi(layout, *maps, trace_map(layout.select([k])))
    residual = choi_distance(reference, composite)
    if residual > eps_fact:
        raise CertificateError(residual, eps_fact)
    return MultiFactorisation(total, marginals, residual, tuple(stages), conds, unital)
