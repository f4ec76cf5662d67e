"""Factorisation of commuting operations across a tensor split of the shared system.

Setting: ``H = I (x) K (x) J``, ``M: H -> A (x) H`` and ``N: H -> B``. When

(i)   ``tr_A o N o M = N``,
(ii)  ``tr_A o M`` is trace non-increasing and unital (or weakly unital on ``K J``),
(iii) ``tr_H o M`` does not depend on ``J`` and ``N`` does not depend on ``I``,

there is a CPTP doubling map ``D: K -> K' (x) K''`` with

    N o M = (M_bar (x) N_bar) o D

where ``M_bar: I K' -> A`` and ``N_bar: K'' J -> B`` are marginal maps.
:func:`factorise` constructs ``D``, ``M_bar`` and ``N_bar`` and checks the
identity numerically.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .algebra import BlockDecomposition, markov_decomposition
from .cpmaps import (EPS_COND, CPMap, choi_distance, compose, identity_map,
                     independence_residual, is_tp, marginal_map, nonincreasing_margin,
                     permute_output, prepare_input, relabel, rescale_to_nonincreasing,
                     state_map, to_choi, tp_completion, tp_residual, trace_map,
                     trace_output, unital_residual)
from .doubling import build_doubling_map
from .entropic import EPS_CMI
from .errors import (CertificateError, ConditionError, FactorisationImpossible,
                     LayoutError, NotMarkovError, PreconditionError)
from .tensor import SystemLayout, partial_trace_keep

EPS_FACT = 1e-8


@dataclass(frozen=True)
class FactorisationInstance:
    """Maps ``m: H -> A (x) H`` and ``n: H -> B`` with ``H = (i, k, j)``."""

    m: CPMap
    n: CPMap
    i: str = "I"
    k: str = "K"
    j: str = "J"

    def __post_init__(self):
        h = set(self.m.in_layout.labels)
        if h != {self.i, self.k, self.j}:
            raise LayoutError(f"input of m must be {{{self.i}, {self.k}, {self.j}}}, got {sorted(h)}")
        if set(self.n.in_layout.labels) != h:
            raise LayoutError("m and n must act on the same system H")
        for lab in h:
            dim = self.m.in_layout.dim_of(lab)
            if self.n.in_layout.dim_of(lab) != dim:
                raise LayoutError(f"factor {lab!r} has different dims in m and n")
            if lab not in self.m.out_layout or self.m.out_layout.dim_of(lab) != dim:
                raise LayoutError(f"m must return factor {lab!r} unchanged in dimension")
        if set(self.a_layout.labels) & set(self.n.out_layout.labels):
            raise LayoutError("outputs of m and n must carry distinct labels")

    @property
    def h_layout(self) -> SystemLayout:
        return self.m.in_layout

    @property
    def h_labels(self) -> list:
        return [self.i, self.k, self.j]

    @property
    def a_layout(self) -> SystemLayout:
        return self.m.out_layout.without(self.m.in_layout.labels)

    @property
    def b_layout(self) -> SystemLayout:
        return self.n.out_layout


@dataclass(frozen=True)
class ConditionReport:
    cond1_residual: float
    cond2_unital_residual: float
    cond2_nonincreasing_margin: float
    cond2_weak_unital_residual: float
    cond3_m_residual: float
    cond3_n_residual: float
    eps_cond: float = EPS_COND
    d_h: int = 1

    @property
    def cond1_ok(self) -> bool:
        return self.cond1_residual <= self.eps_cond

    @property
    def cond2_strict_ok(self) -> bool:
        return self.cond2_nonincreasing_margin <= self.eps_cond and \
            self.cond2_unital_residual <= self.eps_cond

    @property
    def cond2_weak_ok(self) -> bool:
        return self.cond2_nonincreasing_margin <= self.eps_cond and \
            self.cond2_weak_unital_residual <= self.eps_cond

    @property
    def cond2_ok(self) -> bool:
        return self.cond2_strict_ok or self.cond2_weak_ok

    @property
    def cond3_ok(self) -> bool:
        bound = self.eps_cond * self.d_h
        return self.cond3_m_residual <= bound and self.cond3_n_residual <= bound

    @property
    def ok(self) -> bool:
        return self.cond1_ok and self.cond2_ok and self.cond3_ok

    def failed(self) -> list:
        names = []
        if not self.cond1_ok:
            names.append("i")
        if not self.cond2_ok:
            names.append("ii")
        if not self.cond3_ok:
            names.append("iii")
        return names

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(cond1_ok=self.cond1_ok, cond2_ok=self.cond2_ok,
                   cond2_strict_ok=self.cond2_strict_ok, cond2_weak_ok=self.cond2_weak_ok,
                   cond3_ok=self.cond3_ok, ok=self.ok)
        return out


@dataclass(frozen=True)
class FactorisationCertificate:
    decomposition: BlockDecomposition
    d: CPMap
    m_bar: CPMap
    n_bar: CPMap
    residual: float
    claim1_cmi: float
    block_weights: np.ndarray
    report: ConditionReport = None
    rescale: float = 1.0
    weak_path: bool = False
    k_labels: tuple = field(default=("K'", "K''"))

    def composite(self, inst: FactorisationInstance) -> CPMap:
        return factorised_map(inst, self.d, self.m_bar, self.n_bar, self.k_labels)


# ---------------------------------------------------------------------------


def _maps_for_checks(inst: FactorisationInstance):
    m, n = inst.m, inst.n
    tr_a_m = trace_output(m, inst.a_layout.labels)
    tr_h_m = trace_output(m, inst.h_labels)
    return m, n, tr_a_m, tr_h_m


def weak_unital_residual(inst: FactorisationInstance) -> float:
    """``|| tr_{A I} M(pi_I (x) id_KJ) - id_KJ ||``."""
    restricted = prepare_input(inst.m, [inst.i])
    reduced = trace_output(restricted, list(inst.a_layout.labels) + [inst.i])
    return unital_residual(reduced)


def check_conditions(inst: FactorisationInstance, eps_cond: float = EPS_COND) -> ConditionReport:
    """Residuals of conditions (i)-(iii); never raises on well-formed instances."""
    m, n, tr_a_m, tr_h_m = _maps_for_checks(inst)
    nm = compose(n, m)
    cond1 = choi_distance(trace_output(nm, inst.a_layout.labels), n)
    return ConditionReport(
        cond1_residual=cond1,
        cond2_unital_residual=unital_residual(tr_a_m),
        cond2_nonincreasing_margin=max(nonincreasing_margin(tr_a_m), 0.0),
        cond2_weak_unital_residual=weak_unital_residual(inst),
        cond3_m_residual=independence_residual(tr_h_m, inst.j),
        cond3_n_residual=independence_residual(n, inst.i),
        eps_cond=eps_cond,
        d_h=inst.h_layout.total_dim,
    )


def factorised_map(inst: FactorisationInstance, d: CPMap, m_bar: CPMap, n_bar: CPMap,
                   k_labels=("K'", "K''")) -> CPMap:
    """``(M_bar (x) N_bar) o D`` as a map ``H -> A (x) B``."""
    k1, k2 = k_labels
    step = compose(d, identity_map(inst.h_layout))
    step = compose(relabel(m_bar, {inst.k: k1}), step)
    return compose(relabel(n_bar, {inst.k: k2}), step)


def _reset_i(inst: FactorisationInstance) -> CPMap:
    """``pi_I o tr_I o M`` with the original output order."""
    m = inst.m
    dropped = trace_output(m, [inst.i])
    prepared = compose(state_map(m.out_layout.select([inst.i])), dropped)
    return permute_output(prepared, m.out_layout.labels)


def factorise(inst: FactorisationInstance, eps_cond: float = EPS_COND,
              eps_cmi: float = EPS_CMI, eps_fact: float = EPS_FACT, seed: int = 0,
              force: bool = False, k_labels=("K'", "K''")) -> FactorisationCertificate:
    """Construct the doubling map and marginal maps for ``inst``.

    Raises
    ------
    ConditionError
        A condition fails and ``force`` is false.
    FactorisationImpossible
        The Choi state of ``N o M`` is not Markov for ``(A I~ : B J~ | K~)``.
    CertificateError
        The constructed factorisation misses ``N o M`` by more than ``eps_fact``.
    """
    report = check_conditions(inst, eps_cond)
    if not report.ok and not force:
        raise ConditionError(f"conditions {', '.join(report.failed())} fail",
                             report=report, failed=report.failed())
    weak = not report.cond2_strict_ok and report.cond2_weak_ok
    m_work = _reset_i(inst) if weak else inst.m

    n_work, lam = rescale_to_nonincreasing(inst.n)
    if not is_tp(n_work, eps_cond):
        n_work = tp_completion(n_work, eps_cond)
    b_labels = list(n_work.out_layout.labels)

    rho = to_choi(compose(n_work, m_work)).matrix
    tilde = {lab: lab + "~" for lab in inst.h_labels}
    a_side = list(inst.a_layout.labels) + [tilde[inst.i]]
    b_side = b_labels + [tilde[inst.j]]
    try:
        markov = markov_decomposition(rho, a_side, b_side, [tilde[inst.k]],
                                      eps_cmi=eps_cmi, seed=seed)
    except NotMarkovError as exc:
        raise FactorisationImpossible(exc.cmi) from exc

    decomp = markov.decomposition.conj()
    d = build_doubling_map(decomp, inst.k, k_labels)
    m_bar = marginal_map(trace_output(inst.m, inst.h_labels), inst.j)
    n_bar = marginal_map(inst.n, inst.i)
    composite = factorised_map(inst, d, m_bar, n_bar, k_labels)
    residual = choi_distance(compose(inst.n, inst.m), composite)

    rho_k = _k_marginal(rho, tilde[inst.k])
    weights = np.array([float(np.real(np.trace(decomp.blocks[z].isometry.T @ rho_k
                                               @ decomp.blocks[z].isometry.conj())))
                        for z in range(len(decomp.blocks))])
    if residual > eps_fact:
        raise CertificateError(residual, eps_fact)
    return FactorisationCertificate(decomp, d, m_bar, n_bar, residual, markov.cmi, weights,
                                    report, lam, weak, tuple(k_labels))


def _k_marginal(rho, k_tilde: str) -> np.ndarray:
    return partial_trace_keep(rho, [k_tilde]).matrix


def converse_construct(a: CPMap, b: CPMap, decomp: BlockDecomposition,
                       i: str = "I", k: str = "K", j: str = "J",
                       k_labels=("K'", "K''"), eps: float = EPS_COND):
    """Maps ``M = pi_I o a o D`` and ``N = tr_K' o b o D o tr_I`` built from ``a``, ``b`` and ``D``.

    ``a`` acts on ``(i, k)`` and must be TP; ``b`` acts on ``(k, j)``.
    Returns ``(m, n)`` as maps on ``H = (i, k, j)``, with ``m``'s output
    ordered ``(A..., i, k, j)``.
    """
    if not is_tp(a, eps):
        raise PreconditionError(f"a must be TP (residual {tp_residual(a):.2e})")
    if set(a.in_layout.labels) != {i, k} or set(b.in_layout.labels) != {k, j}:
        raise LayoutError("a must act on (I, K) and b on (K, J)")
    k1, k2 = k_labels
    h = SystemLayout(((i, a.in_layout.dim_of(i)), (k, decomp.ambient_dim),
                      (j, b.in_layout.dim_of(j))))
    d = build_doubling_map(decomp, k, k_labels)
    doubled = compose(d, identity_map(h))

    m = compose(relabel(a, {k: k1}), doubled)
    m = compose(state_map(h.select([i])), m)
    m = relabel(m, {k2: k})
    a_labels = list(a.out_layout.labels)
    m = permute_output(m, a_labels + [i, k, j])

    n = compose(trace_map(h.select([i])), identity_map(h))
    n = compose(d, n)
    n = compose(relabel(b, {k: k2}), n)
    n = trace_output(n, [k1])
    return m, n
