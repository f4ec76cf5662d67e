"""Completely positive maps in Kraus form, their Choi operators, and predicates.

A :class:`CPMap` maps operators on ``in_layout`` to operators on ``out_layout``.
When applied to a larger system the map acts on its input factors by label and
the identity acts on everything else; the output factors replace the input
factors at the position of the first one.

The Choi operator uses the fixed state ``psi = (1/sqrt d) sum_i |i>|i>`` in the
computational basis, so ``Choi(M) = (M (x) id)(psi)`` lives on
``out_layout + in_layout.tilde()`` and has unit trace exactly when ``M`` is TP.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import LayoutError, NotCPError, PreconditionError
from .tensor import (Operator, SystemLayout, act_on_rows, herm_eig, max_entangled_layout,
                     op_norm, permute_systems, trace_norm)

EPS_COND = 1e-9
CHOI_NEG_TOL = 1e-8
CHOI_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class Verdict:
    """Boolean outcome of a numerical predicate together with its residual."""

    ok: bool
    residual: float

    def __bool__(self):
        return bool(self.ok)


@dataclass(frozen=True)
class CPMap:
    kraus: np.ndarray
    in_layout: SystemLayout
    out_layout: SystemLayout

    def __post_init__(self):
        in_l = SystemLayout.of(self.in_layout)
        out_l = SystemLayout.of(self.out_layout)
        ops = np.array(self.kraus, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[0] == 0:
            raise LayoutError("a CP map needs a non-empty stack of Kraus matrices")
        if ops.shape[1:] != (out_l.total_dim, in_l.total_dim):
            raise LayoutError(
                f"Kraus shape {ops.shape[1:]} does not map {in_l} -> {out_l}")
        ops.setflags(write=False)
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "in_layout", in_l)
        object.__setattr__(self, "out_layout", out_l)

    @property
    def n_kraus(self) -> int:
        return self.kraus.shape[0]

    @property
    def d_in(self) -> int:
        return self.in_layout.total_dim

    @property
    def d_out(self) -> int:
        return self.out_layout.total_dim

    def kraus_sum(self) -> np.ndarray:
        """``sum_z E_z^dag E_z``."""
        return np.einsum("zki,zkj->ij", self.kraus.conj(), self.kraus)

    def __call__(self, w: Operator) -> Operator:
        return apply(self, w)

    def __mul__(self, scalar: float) -> "CPMap":
        if scalar < 0:
            raise ValueError("CP maps can only be scaled by non-negative numbers")
        return CPMap(self.kraus * np.sqrt(scalar), self.in_layout, self.out_layout)

    __rmul__ = __mul__


@dataclass(frozen=True)
class ChoiOperator:
    """Choi operator on ``out_layout + in_layout.tilde()``."""

    matrix: Operator
    in_layout: SystemLayout

    @property
    def out_layout(self) -> SystemLayout:
        return self.matrix.row.without(self.in_layout.tilde().labels)


# ---------------------------------------------------------------------------
# constructors


def identity_map(layout) -> CPMap:
    layout = SystemLayout.of(layout)
    return CPMap(np.eye(layout.total_dim)[None], layout, layout)


def unitary_map(u, layout) -> CPMap:
    layout = SystemLayout.of(layout)
    return CPMap(np.asarray(u)[None], layout, layout)


def trace_map(layout) -> CPMap:
    """``W -> tr(W)`` on ``layout``; output is the trivial system."""
    layout = SystemLayout.of(layout)
    d = layout.total_dim
    return CPMap(np.eye(d).reshape(d, 1, d), layout, SystemLayout())


def state_map(layout, state=None) -> CPMap:
    """Preparation of ``state`` (default maximally mixed) from the trivial system."""
    layout = SystemLayout.of(layout)
    d = layout.total_dim
    if state is None:
        return CPMap(np.eye(d).reshape(d, d, 1) / np.sqrt(d), SystemLayout(), layout)
    mat = state.matrix if isinstance(state, Operator) else np.asarray(state, dtype=complex)
    es = herm_eig(mat)
    keep = es.eigenvalues > CHOI_ZERO_TOL
    vecs = es.eigenvectors[:, keep] * np.sqrt(es.eigenvalues[keep])
    return CPMap(vecs.T.reshape(-1, d, 1), SystemLayout(), layout)


def classical_map(table, in_layout, out_layout) -> CPMap:
    """Classical channel ``p(y|x)`` embedded with Kraus operators ``sqrt(p) |y><x|``.

    ``table[x][y]`` is indexed by flat basis indices of the two layouts.
    """
    in_layout, out_layout = SystemLayout.of(in_layout), SystemLayout.of(out_layout)
    table = np.asarray(table, dtype=float)
    xs, ys = np.nonzero(table > 0)
    ops = np.zeros((len(xs), out_layout.total_dim, in_layout.total_dim))
    ops[np.arange(len(xs)), ys, xs] = np.sqrt(table[xs, ys])
    return CPMap(ops, in_layout, out_layout)


# ---------------------------------------------------------------------------
# action and composition


def _act_stack(kraus: np.ndarray, stack: np.ndarray, layout, labels, out_layout):
    """Apply every Kraus matrix in ``kraus`` to every matrix in ``stack`` (rows)."""
    n, rows, cols = stack.shape
    flat = stack.transpose(1, 0, 2).reshape(rows, n * cols)
    outs, new_layout = [], None
    for f in kraus:
        res, new_layout = act_on_rows(flat, layout, labels, f, out_layout)
        outs.append(res.reshape(-1, n, cols).transpose(1, 0, 2))
    return np.concatenate(outs, axis=0), new_layout


def _check_input(m: CPMap, layout: SystemLayout):
    for lab, d in m.in_layout.factors:
        if lab not in layout:
            raise LayoutError(f"map input {lab!r} missing from {layout}")
        if layout.dim_of(lab) != d:
            raise LayoutError(f"factor {lab!r} has dim {layout.dim_of(lab)}, map expects {d}")


def _split_axes(layout: SystemLayout, labels):
    pos = [layout.index(lab) for lab in labels]
    rest = [n for n in range(len(layout)) if n not in pos]
    insert = sum(1 for n in rest if n < min(pos)) if pos else 0
    return pos, rest, insert


def apply(m: CPMap, w: Operator) -> Operator:
    """``sum_z E_z W E_z^dag`` with the identity on factors the map does not touch.

    The output factors of ``m`` take the place of the first input factor on
    both the row and the column side.
    """
    _check_input(m, w.row)
    _check_input(m, w.col)
    labels = m.in_layout.labels
    out_l = m.out_layout
    for side in (w.row, w.col):
        clash = set(out_l.labels) & (set(side.labels) - set(labels))
        if clash:
            raise LayoutError(f"output labels {sorted(clash)} collide with untouched factors")
    pr, rr, ir = _split_axes(w.row, labels)
    pc, rc, ic = _split_axes(w.col, labels)
    nrow = len(w.row)
    t = w.matrix.reshape(w.row.dims + w.col.dims)
    t = t.transpose(pr + rr + [nrow + n for n in pc] + [nrow + n for n in rc])
    d_in, d_out, n = m.d_in, m.d_out, m.n_kraus
    d_rr = int(np.prod([w.row.dims[k] for k in rr], dtype=np.int64))
    d_rc = int(np.prod([w.col.dims[k] for k in rc], dtype=np.int64))
    x = m.kraus.reshape(n * d_out, d_in) @ t.reshape(d_in, -1)
    x = x.reshape(n, d_out * d_rr, d_in, d_rc).transpose(1, 3, 0, 2).reshape(d_out * d_rr * d_rc, n * d_in)
    kc = m.kraus.conj().transpose(0, 2, 1).reshape(n * d_in, d_out)
    y = (x @ kc).reshape(d_out * d_rr, d_rc, d_out).transpose(0, 2, 1)
    rest_r = [w.row.factors[k] for k in rr]
    rest_c = [w.col.factors[k] for k in rc]
    row = SystemLayout(tuple(rest_r[:ir]) + out_l.factors + tuple(rest_r[ir:]))
    col = SystemLayout(tuple(rest_c[:ic]) + out_l.factors + tuple(rest_c[ic:]))
    no, nr, nc = len(out_l), len(rest_r), len(rest_c)
    y = y.reshape(out_l.dims + tuple(f[1] for f in rest_r) + out_l.dims + tuple(f[1] for f in rest_c))
    r_axes = list(range(no, no + ir)) + list(range(no)) + list(range(no + ir, no + nr))
    base = no + nr
    c_axes = [base + no + k for k in range(ic)] + [base + k for k in range(no)] + \
        [base + no + k for k in range(ic, nc)]
    y = y.transpose(r_axes + c_axes)
    return Operator(y.reshape(row.total_dim, col.total_dim), row, col)


def compose(n: CPMap, m: CPMap, compress: bool = True) -> CPMap:
    """``n o m``; ``n`` acts on a labeled subset of ``m``'s output."""
    _check_input(n, m.out_layout)
    ops, out_layout = _act_stack(n.kraus, m.kraus, m.out_layout, n.in_layout.labels,
                                 n.out_layout)
    result = CPMap(ops, m.in_layout, out_layout)
    return compress_kraus(result) if compress else result


def tensor_maps(a: CPMap, b: CPMap, compress: bool = True) -> CPMap:
    ops = np.einsum("xij,ykl->xyikjl", a.kraus, b.kraus)
    ops = ops.reshape(a.n_kraus * b.n_kraus, a.d_out * b.d_out, a.d_in * b.d_in)
    result = CPMap(ops, a.in_layout + b.in_layout, a.out_layout + b.out_layout)
    return compress_kraus(result) if compress else result


def extend(m: CPMap, layout) -> CPMap:
    """``m (x) id`` on the extra factors ``layout`` (appended after ``m``'s own)."""
    return tensor_maps(m, identity_map(layout), compress=False)


def relabel(m: CPMap, mapping: Mapping[str, str]) -> CPMap:
    return CPMap(m.kraus, m.in_layout.relabel(mapping), m.out_layout.relabel(mapping))


def relabel_output(m: CPMap, mapping: Mapping[str, str]) -> CPMap:
    return CPMap(m.kraus, m.in_layout, m.out_layout.relabel(mapping))


def permute_output(m: CPMap, order: Sequence[str]) -> CPMap:
    """Same map with output factors reordered to ``order``."""
    idx = [m.out_layout.index(lab) for lab in order]
    if sorted(idx) != list(range(len(m.out_layout))):
        raise LayoutError(f"{order} is not a permutation of {m.out_layout.labels}")
    new_out = SystemLayout(tuple(m.out_layout.factors[i] for i in idx))
    t = m.kraus.reshape((m.n_kraus,) + m.out_layout.dims + (m.d_in,))
    t = t.transpose([0] + [1 + i for i in idx] + [len(idx) + 1])
    return CPMap(t.reshape(m.n_kraus, m.d_out, m.d_in), m.in_layout, new_out)


def permute_input(m: CPMap, order: Sequence[str]) -> CPMap:
    idx = [m.in_layout.index(lab) for lab in order]
    if sorted(idx) != list(range(len(m.in_layout))):
        raise LayoutError(f"{order} is not a permutation of {m.in_layout.labels}")
    new_in = SystemLayout(tuple(m.in_layout.factors[i] for i in idx))
    t = m.kraus.reshape((m.n_kraus, m.d_out) + m.in_layout.dims)
    t = t.transpose([0, 1] + [2 + i for i in idx])
    return CPMap(t.reshape(m.n_kraus, m.d_out, m.d_in), new_in, m.out_layout)


def trace_output(m: CPMap, labels: Iterable[str]) -> CPMap:
    """``tr_labels o m``."""
    labels = list(labels)
    if not labels:
        return m
    return compose(trace_map(m.out_layout.select(labels)), m)


def discard_input(m: CPMap, layout) -> CPMap:
    """``m o tr_layout`` where ``layout`` lists the extra (ignored) input factors."""
    return tensor_maps(m, trace_map(layout), compress=False)


def prepare_input(m: CPMap, labels: Iterable[str], state=None) -> CPMap:
    """``W -> m(W (x) zeta)`` where ``zeta`` fills the input factors ``labels``."""
    labels = list(labels)
    sub = m.in_layout.select(labels)
    rest = m.in_layout.without(labels)
    prep = tensor_maps(identity_map(rest), state_map(sub, state), compress=False)
    return compose(m, prep)


def compress_kraus(m: CPMap, force: bool = False) -> CPMap:
    """Re-derive a minimal Kraus family via the Choi operator when it pays off."""
    if not force and m.n_kraus <= m.d_in * m.d_out:
        return m
    vecs = m.kraus.reshape(m.n_kraus, -1)
    gram = vecs.T @ vecs.conj()
    w, u = np.linalg.eigh((gram + gram.conj().T) / 2)
    scale = max(float(w[-1]), 0.0) if w.size else 0.0
    keep = w > 1e-15 * max(scale, 1e-300)
    if not np.any(keep):
        return CPMap(np.zeros((1, m.d_out, m.d_in)), m.in_layout, m.out_layout)
    ops = (u[:, keep] * np.sqrt(w[keep])).T.reshape(-1, m.d_out, m.d_in)
    return CPMap(ops[::-1], m.in_layout, m.out_layout)


# ---------------------------------------------------------------------------
# Choi operators


def to_choi(m: CPMap) -> ChoiOperator:
    vecs = m.kraus.reshape(m.n_kraus, -1)
    mat = vecs.T @ vecs.conj() / m.d_in
    return ChoiOperator(Operator(mat, m.out_layout + m.in_layout.tilde()), m.in_layout)


def from_choi(c: ChoiOperator) -> CPMap:
    """Kraus family from the eigendecomposition of a Choi operator."""
    in_layout = c.in_layout
    out_layout = c.out_layout
    mat = permute_systems(c.matrix, out_layout.labels + in_layout.tilde().labels).matrix
    es = herm_eig(mat)
    if es.eigenvalues.size and es.eigenvalues[-1] < -CHOI_NEG_TOL:
        raise NotCPError(f"Choi operator has eigenvalue {es.eigenvalues[-1]:.3e}")
    keep = es.eigenvalues > CHOI_ZERO_TOL
    d = in_layout.total_dim
    if not np.any(keep):
        return CPMap(np.zeros((1, out_layout.total_dim, d)), in_layout, out_layout)
    vecs = es.eigenvectors[:, keep] * np.sqrt(d * es.eigenvalues[keep])
    return CPMap(vecs.T.reshape(-1, out_layout.total_dim, d), in_layout, out_layout)


def choi_state(in_layout) -> ChoiOperator:
    """Choi operator of the identity map: the maximally entangled state on ``in + in~``."""
    in_layout = SystemLayout.of(in_layout)
    return ChoiOperator(max_entangled_layout(in_layout), in_layout)


def push_choi(c: ChoiOperator, *maps: CPMap) -> ChoiOperator:
    """Choi operator of ``maps[-1] o ... o maps[0] o (map of c)``.

    Each map acts on a labeled part of the current output. Propagating the
    Choi state avoids ever forming the Kraus family of a long composite.
    """
    mat = c.matrix
    for m in maps:
        mat = apply(m, mat)
    return ChoiOperator(mat, c.in_layout)


def adjoint(m: CPMap) -> CPMap:
    """Heisenberg-picture map ``X -> sum_z E_z^dag X E_z`` (output to input)."""
    return CPMap(m.kraus.conj().transpose(0, 2, 1), m.out_layout, m.in_layout)


def output_layout(layout, *maps: CPMap) -> SystemLayout:
    """Layout reached by applying ``maps`` in turn to a system on ``layout``."""
    layout = SystemLayout.of(layout)
    for m in maps:
        _check_input(m, layout)
        pos, rest, insert = _split_axes(layout, m.in_layout.labels)
        facs = [layout.factors[n] for n in rest]
        layout = SystemLayout(tuple(facs[:insert]) + m.out_layout.factors + tuple(facs[insert:]))
    return layout


def sequence_choi(in_layout, *maps: CPMap) -> ChoiOperator:
    """Choi operator of ``maps[-1] o ... o maps[0]`` on ``in_layout``.

    When the composite has a smaller output than input, the maximally entangled
    state on the output is pulled back through the adjoint maps instead, which
    keeps every intermediate operator small.
    """
    in_layout = SystemLayout.of(in_layout)
    out_layout = output_layout(in_layout, *maps)
    if out_layout.total_dim >= in_layout.total_dim:
        return push_choi(choi_state(in_layout), *maps)
    mat = max_entangled_layout(out_layout)
    for m in reversed(maps):
        mat = apply(adjoint(m), mat)
    # mat = (1/d_out) sum L^dag(|a><a'|) (x) |a><a'| on (in, out~)
    ref = out_layout.tilde().labels
    mat = permute_systems(mat, list(in_layout.labels) + list(ref))
    ratio = out_layout.total_dim / in_layout.total_dim
    swap = {lab: lab + "~" for lab in in_layout.labels}
    swap.update({lab + "~": lab for lab in out_layout.labels})
    choi = Operator(ratio * mat.matrix.T, mat.row.relabel(swap))
    choi = permute_systems(choi, list(out_layout.labels) + list(in_layout.tilde().labels))
    return ChoiOperator(choi, in_layout)


def _as_choi(x) -> Operator:
    return x.matrix if isinstance(x, ChoiOperator) else to_choi(x).matrix


def choi_distance(m1, m2) -> float:
    """Trace norm of the Choi difference; factor order is matched by label.

    Accepts :class:`CPMap` or :class:`ChoiOperator` arguments.
    """
    c1, c2 = _as_choi(m1), _as_choi(m2)
    if set(c1.row.labels) != set(c2.row.labels):
        raise LayoutError(f"maps act on different systems: {c1.row} vs {c2.row}")
    c2 = permute_systems(c2, c1.row.labels)
    return trace_norm(c1.matrix - c2.matrix)


# ---------------------------------------------------------------------------
# predicates


def tp_residual(m: CPMap) -> float:
    return op_norm(m.kraus_sum() - np.eye(m.d_in))


def nonincreasing_margin(m: CPMap) -> float:
    """``lambda_max(sum E^dag E) - 1``; non-positive for trace non-increasing maps."""
    return float(np.linalg.eigvalsh(m.kraus_sum())[-1]) - 1.0


def unital_residual(m: CPMap) -> float:
    if m.d_in != m.d_out:
        raise LayoutError(f"unitality needs equal dimensions, got {m.in_layout} -> {m.out_layout}")
    out = apply(m, Operator(np.eye(m.d_in), m.in_layout))
    if set(out.row.labels) == set(m.in_layout.labels):
        out = permute_systems(out, m.in_layout.labels)
    return op_norm(out.matrix - np.eye(m.d_in))


def is_tp(m: CPMap, eps: float = EPS_COND) -> Verdict:
    r = tp_residual(m)
    return Verdict(r <= eps, r)


def is_trace_nonincreasing(m: CPMap, eps: float = EPS_COND) -> Verdict:
    r = nonincreasing_margin(m)
    return Verdict(r <= eps, max(r, 0.0))


def is_unital(m: CPMap, eps: float = EPS_COND) -> Verdict:
    r = unital_residual(m)
    return Verdict(r <= eps, r)


def marginal_map(m: CPMap, labels, state=None) -> CPMap:
    """``W -> m(W (x) zeta)`` with ``zeta`` maximally mixed unless given."""
    labels = [labels] if isinstance(labels, str) else list(labels)
    return prepare_input(m, labels, state)


def independence_residual(m: CPMap, labels) -> float:
    labels = [labels] if isinstance(labels, str) else list(labels)
    for lab in labels:
        m.in_layout.index(lab)
    bar = marginal_map(m, labels)
    return choi_distance(m, discard_input(bar, m.in_layout.select(labels)))


def is_independent_of(m: CPMap, labels, eps: float = EPS_COND) -> Verdict:
    r = independence_residual(m, labels)
    return Verdict(r <= eps * m.d_in, r)


# ---------------------------------------------------------------------------
# normalisation and dilation


def rescale_to_nonincreasing(m: CPMap, eps: float = EPS_COND):
    """Return ``(m / lam, lam)`` with ``lam = lambda_max(sum E^dag E)``.

    Maps with ``lam <= 1 + eps`` count as non-increasing already and come back
    unchanged with ``lam = 1``.
    """
    lam = float(np.linalg.eigvalsh(m.kraus_sum())[-1])
    if lam <= 1.0 + eps:
        return m, 1.0
    return CPMap(m.kraus / np.sqrt(lam), m.in_layout, m.out_layout), lam


def perp_label(layout: SystemLayout) -> str:
    return "+".join(layout.labels) + "+perp" if len(layout) else "perp"


def tp_completion(m: CPMap, eps: float = EPS_COND) -> CPMap:
    """Add a flag vector ``|perp>`` that absorbs the missing trace.

    The output space is ``out (+) span{|perp>}``, recorded as a single factor of
    dimension ``d_out + 1`` whose last basis vector is ``|perp>``.
    """
    if not is_trace_nonincreasing(m, eps):
        raise PreconditionError("tp_completion needs a trace non-increasing map")
    d_out = m.d_out
    gap = np.eye(m.d_in) - m.kraus_sum()
    es = herm_eig(gap)
    keep = es.eigenvalues > CHOI_ZERO_TOL
    rows = (es.eigenvectors[:, keep] * np.sqrt(es.eigenvalues[keep])).conj().T
    padded = np.concatenate([m.kraus, np.zeros((m.n_kraus, 1, m.d_in))], axis=1)
    extra = np.zeros((rows.shape[0], d_out + 1, m.d_in), dtype=complex)
    extra[:, d_out, :] = rows
    out_layout = SystemLayout(((perp_label(m.out_layout), d_out + 1),))
    return CPMap(np.concatenate([padded, extra]), m.in_layout, out_layout)


def drop_perp(m: CPMap, out_layout) -> CPMap:
    """Project the output of a completed map back onto the original space."""
    out_layout = SystemLayout.of(out_layout)
    d = out_layout.total_dim
    if m.d_out != d + 1:
        raise LayoutError("map output is not a completed space")
    return CPMap(m.kraus[:, :d, :], m.in_layout, out_layout)


def stinespring(m: CPMap, env_label: str = "R", eps: float = EPS_COND) -> Operator:
    """Isometry ``V: in -> out (x) env`` with ``tr_env(V rho V^dag) = m(rho)``."""
    if not is_tp(m, eps):
        raise PreconditionError("Stinespring dilation here requires a TP map")
    v = m.kraus.transpose(1, 0, 2).reshape(m.d_out * m.n_kraus, m.d_in)
    env = SystemLayout(((env_label, m.n_kraus),))
    return Operator(v, m.out_layout + env, m.in_layout)
