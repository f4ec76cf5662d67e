"""Commuting measurement families on ``K`` rewritten as local operators on ``K_A (x) K_B``.

Given families ``X[i][alpha]`` and ``Y[j][beta]`` of PSD operators on ``K`` with
``[X, Y] = 0``, there is an isometry ``V: K -> K_A (x) K_B`` and local families
``Xbar`` on ``K_A`` and ``Ybar`` on ``K_B`` such that

    X[i][alpha] = V^dag (Xbar[i][alpha] (x) id) V,
    Y[j][beta]  = V^dag (id (x) Ybar[j][beta]) V,
    X Y         = V^dag (Xbar (x) Ybar) V.

The construction lifts the families to measure-and-record maps, factorises the
pair with :func:`qfactor.factorise.factorise`, reads the local operators off the
marginal maps and dilates the doubling map.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cpmaps import EPS_COND, CPMap, Verdict, stinespring, trace_output
from .errors import ConditionError, LayoutError, PreconditionError
from .factorise import (EPS_FACT, FactorisationCertificate, FactorisationInstance,
                        factorise)
from .tensor import SystemLayout, herm_eig, op_norm, psd_sqrt

PSD_TOL = 1e-10


@dataclass(frozen=True)
class MeasurementFamily:
    """Complete family: ``operators[i][alpha]`` PSD on ``C^dim`` with ``sum_alpha = id``.

    Outcome ``0`` of every setting holds the completion operator.
    """

    operators: tuple
    dim: int

    def __post_init__(self):
        ops = tuple(tuple(np.array(x, dtype=complex) for x in setting)
                    for setting in self.operators)
        for setting in ops:
            if not setting:
                raise LayoutError("every setting needs at least one outcome")
            for x in setting:
                if x.shape != (self.dim, self.dim):
                    raise LayoutError(f"operator of shape {x.shape} on C^{self.dim}")
                x.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @property
    def n_settings(self) -> int:
        return len(self.operators)

    @property
    def n_outcomes(self) -> tuple:
        return tuple(len(s) for s in self.operators)

    def normalisation_residual(self) -> float:
        eye = np.eye(self.dim)
        return max(op_norm(sum(s) - eye) for s in self.operators)

    def __getitem__(self, i):
        return self.operators[i]


@dataclass(frozen=True)
class ObservableFactorisation:
    v: np.ndarray
    a_ops: tuple
    b_ops: tuple
    d_ka: int
    d_kb: int
    residual_x: float
    residual_y: float
    residual_xy: float
    mode: str
    certificate: FactorisationCertificate

    @property
    def residual(self) -> float:
        return max(self.residual_x, self.residual_y, self.residual_xy)


def _check_psd(x: np.ndarray, where: str):
    if np.max(np.abs(x - x.conj().T), initial=0.0) > 1e-10 * (1 + np.max(np.abs(x))):
        raise PreconditionError(f"{where} is not Hermitian")
    low = herm_eig(x).eigenvalues[-1]
    if low < -PSD_TOL:
        raise PreconditionError(f"{where} is not PSD (eigenvalue {low:.3e})")


def complete_family(raw) -> tuple:
    """Scale the family by ``gamma`` and prepend ``X[i][0] = id - gamma sum_alpha X[i][alpha]``.

    Returns ``(MeasurementFamily, gamma)``. A :class:`MeasurementFamily` is
    already complete and is returned unchanged with ``gamma = 1``.
    """
    if isinstance(raw, MeasurementFamily):
        return raw, 1.0
    settings = [[np.asarray(x, dtype=complex) for x in s] for s in raw]
    if not settings or not all(settings):
        raise PreconditionError("family needs at least one setting with one operator")
    dim = settings[0][0].shape[0]
    for i, s in enumerate(settings):
        for a, x in enumerate(s):
            if x.shape != (dim, dim):
                raise LayoutError(f"operator ({i}, {a}) has shape {x.shape}")
            _check_psd(x, f"operator ({i}, {a})")
    top = max(herm_eig(sum(s)).eigenvalues[0] for s in settings)
    gamma = 1.0 if top <= 1.0 else 1.0 / top
    completed = []
    for s in settings:
        scaled = [gamma * x for x in s]
        rest = np.eye(dim) - sum(scaled)
        completed.append([(rest + rest.conj().T) / 2] + scaled)
    return MeasurementFamily(tuple(tuple(s) for s in completed), dim), gamma


def check_commutation(x: MeasurementFamily, y: MeasurementFamily,
                      eps: float = EPS_COND) -> Verdict:
    if x.dim != y.dim:
        raise LayoutError("families act on different spaces")
    worst = 0.0
    for xs in x.operators:
        for a in xs:
            for ys in y.operators:
                for b in ys:
                    worst = max(worst, op_norm(a @ b - b @ a))
    return Verdict(worst <= eps, worst)


def check_weak_commutation(x: MeasurementFamily, y: MeasurementFamily,
                           eps: float = EPS_COND) -> Verdict:
    """``max_{i,j,beta} || sum_alpha sqrt(X) Y sqrt(X) - Y ||``."""
    if x.dim != y.dim:
        raise LayoutError("families act on different spaces")
    roots = [[psd_sqrt(a) for a in xs] for xs in x.operators]
    worst = 0.0
    for rs in roots:
        for ys in y.operators:
            for b in ys:
                worst = max(worst, op_norm(sum(r @ b @ r for r in rs) - b))
    return Verdict(worst <= eps, worst)


def _readout_kraus(fam: MeasurementFamily, d_out: int, first: bool, d_other: int):
    d_set = fam.n_settings
    ops = []
    for i, setting in enumerate(fam.operators):
        proj = np.zeros((d_set, d_set))
        proj[i, i] = 1.0
        for alpha, x in enumerate(setting):
            rec = np.zeros((d_out, 1))
            rec[alpha, 0] = 1.0
            root = psd_sqrt(x)
            if np.linalg.norm(root) == 0:
                continue
            if first:
                ops.append(np.kron(rec, np.kron(np.kron(proj, root), np.eye(d_other))))
            else:
                ops.append(np.kron(rec, np.kron(np.kron(np.eye(d_other), root), proj)))
    return np.array(ops)


def lift_to_maps(x: MeasurementFamily, y: MeasurementFamily, labels=("A", "B")):
    """Measure-and-record maps ``X, Y: H -> out (x) H`` with ``H = (I, K, J)``.

    ``X`` reads the setting ``i`` from ``I``, measures ``X[i]`` on ``K`` and
    writes the outcome to ``A``; ``Y`` does the same with ``J``, ``Y[j]`` and ``B``.
    """
    if x.dim != y.dim:
        raise LayoutError("families act on different spaces")
    h = SystemLayout((("I", x.n_settings), ("K", x.dim), ("J", y.n_settings)))
    d_a, d_b = max(x.n_outcomes), max(y.n_outcomes)
    mx = CPMap(_readout_kraus(x, d_a, True, y.n_settings), h,
               SystemLayout(((labels[0], d_a),)) + h)
    my = CPMap(_readout_kraus(y, d_b, False, x.n_settings), h,
               SystemLayout(((labels[1], d_b),)) + h)
    return mx, my


def local_operators(m_bar: CPMap, n_outcomes: Sequence[int], setting_label: str,
                    k_label: str = "K") -> tuple:
    """Effects ``sum_F (<alpha| F |i>)^dag (<alpha| F |i>)`` of a marginal map ``(I, K) -> A``."""
    order = [setting_label, k_label]
    lay = m_bar.in_layout
    d_s, d_k = lay.dim_of(setting_label), lay.dim_of(k_label)
    t = m_bar.kraus.reshape((m_bar.n_kraus, m_bar.d_out) + lay.dims)
    t = t.transpose([0, 1] + [2 + lay.index(lab) for lab in order]).reshape(
        m_bar.n_kraus, m_bar.d_out, d_s, d_k)
    out = []
    for i in range(d_s):
        out.append(tuple(np.einsum("fk,fl->kl", t[:, alpha, i, :].conj(), t[:, alpha, i, :])
                         for alpha in range(n_outcomes[i])))
    return tuple(out)


def factorise_observables(x, y, mode: str = "strict", eps_cond: float = EPS_COND,
                          eps_fact: float = EPS_FACT, seed: int = 0) -> ObservableFactorisation:
    """Isometry and local operator families for commuting (or weakly commuting) families."""
    x, _ = complete_family(x)
    y, _ = complete_family(y)
    if mode == "strict":
        verdict = check_commutation(x, y, eps_cond)
    elif mode == "weak":
        verdict = check_weak_commutation(x, y, eps_cond)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if not verdict:
        raise ConditionError(f"{mode} commutation fails (residual {verdict.residual:.2e})")
    mx, my = lift_to_maps(x, y)
    n = trace_output(my, ["I", "K", "J"])
    cert = factorise(FactorisationInstance(mx, n), eps_cond=eps_cond, eps_fact=eps_fact,
                     seed=seed)
    a_bar = local_operators(cert.m_bar, x.n_outcomes, "I")
    b_bar = local_operators(cert.n_bar, y.n_outcomes, "J")

    v_op = stinespring(cert.d, env_label="R")
    d_k = x.dim
    d_r = v_op.row.dim_of("R")
    v = v_op.matrix
    eye_b = np.eye(d_k * d_r)
    b_ops = tuple(tuple(np.kron(b, np.eye(d_r)) for b in s) for s in b_bar)

    def embed_a(a):
        return v.conj().T @ np.kron(a, eye_b) @ v

    def embed_b(b):
        return v.conj().T @ np.kron(np.eye(d_k), b) @ v

    res_x = max(op_norm(embed_a(ab) - xo) for xs, abs_ in zip(x.operators, a_bar)
                for xo, ab in zip(xs, abs_))
    res_y = max(op_norm(embed_b(bb) - yo) for ys, bbs in zip(y.operators, b_ops)
                for yo, bb in zip(ys, bbs))
    res_xy = 0.0
    for xs, abs_ in zip(x.operators, a_bar):
        for ys, bbs in zip(y.operators, b_ops):
            for xo, ab in zip(xs, abs_):
                for yo, bb in zip(ys, bbs):
                    joint = v.conj().T @ np.kron(ab, bb) @ v
                    res_xy = max(res_xy, op_norm(joint - xo @ yo))
    return ObservableFactorisation(v, a_bar, b_ops, d_k, d_k * d_r, res_x, res_y, res_xy,
                                   mode, cert)


def probability_residual(x: MeasurementFamily, y: MeasurementFamily,
                         fac: ObservableFactorisation, states) -> float:
    """Largest gap between ``tr(X Y rho)`` and ``tr((Xbar (x) Ybar) V rho V^dag)``."""
    worst = 0.0
    v = fac.v
    for rho in states:
        lifted = v @ rho @ v.conj().T
        for xs, abs_ in zip(x.operators, fac.a_ops):
            for ys, bbs in zip(y.operators, fac.b_ops):
                for xo, ab in zip(xs, abs_):
                    for yo, bb in zip(ys, bbs):
                        direct = np.trace(xo @ yo @ rho)
                        via = np.trace(np.kron(ab, bb) @ lifted)
                        worst = max(worst, abs(direct - via))
    return float(worst)
