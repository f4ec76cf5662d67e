"""Classical maps whose composite is a PR box, showing the unitality condition is needed.

Registers: ``I``, ``J`` and the outputs ``A``, ``B`` are bits; ``K`` holds a
pair of bits ``(k1, k2)`` (basis index ``2 k1 + k2``) or the extra symbol
``PERP`` (index 4).

* ``X``: if ``k = PERP``, draw a uniform bit ``a`` and set ``k := (a, i)``;
  otherwise output ``a = k1 xor (i k2)``.
* ``Y``: the same with ``j`` and ``b``.

Both orders of composition produce ``a xor b = i j`` on input ``PERP``. That
would win the CHSH game with certainty, which no factorised quantum strategy
can do.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .cpmaps import EPS_COND, CPMap, apply, classical_map, compose, trace_output
from .errors import ConditionError, FactorisationImpossible, StateError
from .factorise import ConditionReport, FactorisationInstance, check_conditions, factorise
from .tensor import Operator, SystemLayout

PERP = 4
D_K = 5
TSIRELSON_WIN = float(np.cos(np.pi / 8) ** 2)

H_LAYOUT = SystemLayout((("I", 2), ("K", D_K), ("J", 2)))


def _h_index(i: int, k: int, j: int) -> int:
    return (i * D_K + k) * 2 + j


def _measure_and_record(first: bool) -> CPMap:
    """Transition table of ``X`` (``first``) or ``Y`` as a classical map ``H -> out (x) H``."""
    label = "A" if first else "B"
    out_layout = SystemLayout(((label, 2),)) + H_LAYOUT
    table = np.zeros((H_LAYOUT.total_dim, out_layout.total_dim))
    for i, k, j in itertools.product(range(2), range(D_K), range(2)):
        x = _h_index(i, k, j)
        setting = i if first else j
        if k == PERP:
            for r in range(2):
                y = r * H_LAYOUT.total_dim + _h_index(i, 2 * r + setting, j)
                table[x, y] += 0.5
        else:
            k1, k2 = divmod(k, 2)
            out = k1 ^ (setting & k2)
            table[x, out * H_LAYOUT.total_dim + x] = 1.0
    return classical_map(table, H_LAYOUT, out_layout)


def pr_maps() -> tuple:
    """The two classical maps ``(X, Y)``, each ``H -> out (x) H`` with ``H = (I, K, J)``."""
    return _measure_and_record(True), _measure_and_record(False)


def build_pr_maps() -> FactorisationInstance:
    """``M = X`` and ``N = tr_H o Y``."""
    x, y = pr_maps()
    return FactorisationInstance(x, trace_output(y, H_LAYOUT.labels))


@dataclass(frozen=True)
class Behavior:
    """Conditional distribution ``p[a, b, i, j] = p(a, b | i, j)`` on bits."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, 2, 2, 2):
            raise StateError(f"behavior table must have shape (2, 2, 2, 2), got {p.shape}")
        if np.any(p < -1e-12):
            raise StateError("behavior has negative entries")
        sums = p.sum(axis=(0, 1))
        if np.max(np.abs(sums - 1)) > 1e-9:
            raise StateError("behavior is not normalised for every input pair")
        object.__setattr__(self, "p", p)

    def mix(self, other: "Behavior", t: float) -> "Behavior":
        return Behavior((1 - t) * self.p + t * other.p)


def pr_behavior() -> Behavior:
    p = np.zeros((2, 2, 2, 2))
    for a, b, i, j in itertools.product(range(2), repeat=4):
        p[a, b, i, j] = 0.5 if a ^ b == i & j else 0.0
    return Behavior(p)


def uniform_behavior() -> Behavior:
    return Behavior(np.full((2, 2, 2, 2), 0.25))


def deterministic_behavior(f, g) -> Behavior:
    """``a = f[i]``, ``b = g[j]``."""
    p = np.zeros((2, 2, 2, 2))
    for i, j in itertools.product(range(2), repeat=2):
        p[f[i], g[j], i, j] = 1.0
    return Behavior(p)


def chsh_win_prob(b: Behavior) -> float:
    """Winning probability of ``a xor b = i j`` for uniform inputs."""
    if not isinstance(b, Behavior):
        b = Behavior(b)
    total = 0.0
    for a, bb, i, j in itertools.product(range(2), repeat=4):
        if a ^ bb == i & j:
            total += b.p[a, bb, i, j]
    return total / 4


def classical_max_win() -> float:
    """Best CHSH score over the 16 deterministic local strategies."""
    funcs = list(itertools.product(range(2), repeat=2))
    return max(chsh_win_prob(deterministic_behavior(f, g)) for f in funcs for g in funcs)


def composed_behavior(inst: FactorisationInstance, k: int = PERP) -> Behavior:
    """``p(a, b | i, j)`` of ``N o M`` on the classical input ``(i, k, j)``."""
    nm = compose(inst.n, inst.m)
    p = np.zeros((2, 2, 2, 2))
    for i, j in itertools.product(range(2), repeat=2):
        w = np.zeros((H_LAYOUT.total_dim,) * 2)
        x = _h_index(i, k, j)
        w[x, x] = 1.0
        out = apply(nm, Operator(w, H_LAYOUT))
        diag = np.real(np.diag(out.matrix)).reshape(2, 2)
        # output order of N o M is (B, A)
        labels = out.row.labels
        if labels[0] == "B":
            diag = diag.T
        p[:, :, i, j] = diag
    return Behavior(p)


@dataclass
class NecessityReport:
    conditions: ConditionReport
    failed: tuple
    cmi: float
    pr_win_prob: float
    classical_max: float
    tsirelson_win: float = TSIRELSON_WIN
    messages: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "conditions": self.conditions.to_dict(),
            "failed": list(self.failed),
            "cmi": self.cmi,
            "pr_win_prob": self.pr_win_prob,
            "classical_max": self.classical_max,
            "tsirelson_win": self.tsirelson_win,
        }


def demonstrate_necessity(eps_cond: float = EPS_COND, seed: int = 0) -> NecessityReport:
    """Run the pipeline on the PR instance, first normally, then forced past the checks."""
    inst = build_pr_maps()
    messages = []
    try:
        factorise(inst, eps_cond=eps_cond, seed=seed)
    except ConditionError as exc:
        report, failed = exc.report, exc.failed
        messages.append(f"pipeline stops: {exc}")
    else:  # pragma: no cover - the instance is built to fail
        raise AssertionError("PR instance passed the factorisation conditions")
    try:
        factorise(inst, eps_cond=eps_cond, seed=seed, force=True)
    except FactorisationImpossible as exc:
        cmi = exc.cmi
        messages.append(f"forced pipeline: {exc}")
    else:  # pragma: no cover
        raise AssertionError("forced PR pipeline produced a certificate")
    return NecessityReport(report, failed, cmi, chsh_win_prob(composed_behavior(inst)),
                           classical_max_win(), TSIRELSON_WIN, messages)


def condition_report() -> ConditionReport:
    return check_conditions(build_pr_maps())
