"""JSON instance and report files (schema version "1").

Instance file::

    {
      "version": "1",
      "kind": "pair" | "multi" | "families",
      "maps": ...,            # pair: {"M": map, "N": map}; multi: [map, ...]
      "labels": {"i": "I", "k": "K", "j": "J"},   # pair only, optional
      "families": {"X": [[matrix, ...], ...], "Y": ...},  # families only
      "expected": {...}       # optional reference values, not interpreted
    }

A map is ``{"in": [[label, dim], ...], "out": [[label, dim], ...]}`` plus
either ``"kraus": [matrix, ...]`` or ``"choi": matrix`` (layout ``out + in~``).
Matrices are row-major nested lists whose entries are ``[re, im]`` pairs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..cpmaps import CPMap, ChoiOperator, from_choi
from ..errors import QFactorError
from ..factorise import FactorisationInstance
from ..tensor import Operator, SystemLayout, herm_eig, herm_tolerance
from ..tsirelson import MeasurementFamily

VERSION = "1"
KINDS = ("pair", "multi", "families")
PSD_TOL = 1e-9


class ParseError(QFactorError):
    """Malformed instance or report file; ``locus`` names the offending field."""

    def __init__(self, message, locus=""):
        super().__init__(f"{locus}: {message}" if locus else message)
        self.locus = locus


class ValidationError(QFactorError):
    """Well-formed file whose content violates an invariant (named by ``invariant``)."""

    def __init__(self, invariant, message=""):
        super().__init__(f"{invariant}: {message}" if message else invariant)
        self.invariant = invariant


# ---------------------------------------------------------------------------
# matrices and layouts


def encode_matrix(mat) -> list:
    mat = np.asarray(mat, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def decode_matrix(data, locus: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("matrix entries must be [re, im] pairs of numbers", locus) from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ParseError(f"expected a matrix of [re, im] pairs, got array of shape {arr.shape}",
                         locus)
    if not np.all(np.isfinite(arr)):
        raise ParseError("matrix has non-finite entries", locus)
    return arr[..., 0] + 1j * arr[..., 1]


def encode_layout(layout: SystemLayout) -> list:
    return [[lab, d] for lab, d in layout.factors]


def decode_layout(data, locus: str) -> SystemLayout:
    if not isinstance(data, list):
        raise ParseError("layout must be a list of [label, dim] pairs", locus)
    facs = []
    for n, item in enumerate(data):
        if (not isinstance(item, list) or len(item) != 2 or not isinstance(item[0], str)
                or not isinstance(item[1], int) or isinstance(item[1], bool)):
            raise ParseError("factor must be [label, dim]", f"{locus}[{n}]")
        facs.append(tuple(item))
    try:
        return SystemLayout(tuple(facs))
    except QFactorError as exc:
        raise ValidationError("layout", str(exc)) from None


def encode_map(m: CPMap) -> dict:
    return {"in": encode_layout(m.in_layout), "out": encode_layout(m.out_layout),
            "kraus": [encode_matrix(k) for k in m.kraus]}


def decode_map(data, locus: str) -> CPMap:
    if not isinstance(data, dict):
        raise ParseError("map must be an object", locus)
    for key in ("in", "out"):
        if key not in data:
            raise ParseError(f"missing field {key!r}", locus)
    in_l = decode_layout(data["in"], f"{locus}.in")
    out_l = decode_layout(data["out"], f"{locus}.out")
    if ("kraus" in data) == ("choi" in data):
        raise ParseError("map needs exactly one of 'kraus' and 'choi'", locus)
    if "kraus" in data:
        if not isinstance(data["kraus"], list) or not data["kraus"]:
            raise ParseError("kraus must be a non-empty list", f"{locus}.kraus")
        ops = [decode_matrix(k, f"{locus}.kraus[{n}]") for n, k in enumerate(data["kraus"])]
        for n, k in enumerate(ops):
            if k.shape != (out_l.total_dim, in_l.total_dim):
                raise ValidationError(
                    "shape", f"{locus}.kraus[{n}] has shape {k.shape}, expected "
                    f"{(out_l.total_dim, in_l.total_dim)}")
        return CPMap(np.array(ops), in_l, out_l)
    mat = decode_matrix(data["choi"], f"{locus}.choi")
    dim = out_l.total_dim * in_l.total_dim
    if mat.shape != (dim, dim):
        raise ValidationError("shape", f"{locus}.choi has shape {mat.shape}, expected {(dim, dim)}")
    _require_psd(mat, f"{locus}.choi")
    return from_choi(ChoiOperator(Operator(mat, out_l + in_l.tilde()), in_l))


def _require_psd(mat: np.ndarray, locus: str):
    if np.max(np.abs(mat - mat.conj().T), initial=0.0) > herm_tolerance(mat):
        raise ValidationError("Hermitian", f"{locus} is not Hermitian")
    low = herm_eig(mat).eigenvalues[-1] if mat.size else 0.0
    if low < -PSD_TOL:
        raise ValidationError("PSD", f"{locus} has eigenvalue {low:.3e}")


# ---------------------------------------------------------------------------
# instance files


@dataclass
class InstanceFile:
    kind: str
    instance: FactorisationInstance | None = None
    maps: list | None = None
    families: tuple | None = None
    expected: dict = field(default_factory=dict)


def _load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", str(path)) from None
    except UnicodeDecodeError:
        raise ParseError("file is not UTF-8", str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from None
    if not isinstance(data, dict):
        raise ParseError("top level must be an object", str(path))
    return data


def _decode_family(data, locus: str) -> list:
    if not isinstance(data, list) or not data:
        raise ParseError("family must be a non-empty list of settings", locus)
    settings = []
    for i, s in enumerate(data):
        if not isinstance(s, list) or not s:
            raise ParseError("setting must be a non-empty list of matrices", f"{locus}[{i}]")
        ops = [decode_matrix(x, f"{locus}[{i}][{a}]") for a, x in enumerate(s)]
        for a, x in enumerate(ops):
            if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape != ops[0].shape:
                raise ValidationError("shape", f"{locus}[{i}][{a}] has shape {x.shape}")
            _require_psd(x, f"{locus}[{i}][{a}]")
        settings.append(ops)
    dim = settings[0][0].shape[0]
    if any(s[0].shape[0] != dim for s in settings):
        raise ValidationError("shape", f"{locus}: settings act on different spaces")
    return settings


def parse_instance(path) -> InstanceFile:
    """Read and validate an instance file.

    Raises
    ------
    ParseError
        Unreadable file, invalid JSON or missing/ill-typed fields.
    ValidationError
        Shapes, PSD-ness or layout invariants fail.
    """
    data = _load_json(path)
    if data.get("version") != VERSION:
        raise ParseError(f"unsupported version {data.get('version')!r}", "version")
    kind = data.get("kind")
    if kind not in KINDS:
        raise ParseError(f"kind must be one of {KINDS}", "kind")
    expected = data.get("expected", {})
    if kind == "families":
        fams = data.get("families")
        if not isinstance(fams, dict) or set(fams) != {"X", "Y"}:
            raise ParseError("families must be an object with keys 'X' and 'Y'", "families")
        x = _decode_family(fams["X"], "families.X")
        y = _decode_family(fams["Y"], "families.Y")
        if x[0][0].shape != y[0][0].shape:
            raise ValidationError("shape", "families act on different spaces")
        return InstanceFile(kind, families=(x, y), expected=expected)
    maps = data.get("maps")
    if kind == "multi":
        if not isinstance(maps, list) or len(maps) < 2:
            raise ParseError("multi instance needs a list of at least two maps", "maps")
        return InstanceFile(kind, maps=[decode_map(m, f"maps[{n}]") for n, m in enumerate(maps)],
                            expected=expected)
    if not isinstance(maps, dict) or set(maps) != {"M", "N"}:
        raise ParseError("pair instance needs maps 'M' and 'N'", "maps")
    labels = data.get("labels", {})
    if not isinstance(labels, dict):
        raise ParseError("labels must be an object", "labels")
    m = decode_map(maps["M"], "maps.M")
    n = decode_map(maps["N"], "maps.N")
    try:
        inst = FactorisationInstance(m, n, i=labels.get("i", "I"), k=labels.get("k", "K"),
                                     j=labels.get("j", "J"))
    except QFactorError as exc:
        raise ValidationError("layout", str(exc)) from None
    return InstanceFile(kind, instance=inst, expected=expected)


def instance_to_json(obj, expected: dict | None = None) -> str:
    """Serialise a :class:`FactorisationInstance`, a list of maps or a pair of families."""
    data = {"version": VERSION}
    if isinstance(obj, FactorisationInstance):
        data.update(kind="pair", maps={"M": encode_map(obj.m), "N": encode_map(obj.n)},
                    labels={"i": obj.i, "k": obj.k, "j": obj.j})
    elif isinstance(obj, tuple) and len(obj) == 2 and not isinstance(obj[0], CPMap):
        fams = {}
        for key, fam in zip("XY", obj):
            ops = fam.operators if isinstance(fam, MeasurementFamily) else fam
            fams[key] = [[encode_matrix(x) for x in s] for s in ops]
        data.update(kind="families", families=fams)
    else:
        data.update(kind="multi", maps=[encode_map(m) for m in obj])
    if expected:
        data["expected"] = expected
    return json.dumps(data, separators=(",", ":")) + "\n"


def write_instance(path, obj, expected: dict | None = None):
    Path(path).write_text(instance_to_json(obj, expected), encoding="utf-8")


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    """Outcome of one CLI command. ``to_json`` and :func:`parse_report` round-trip."""

    command: str
    status: str
    exit_code: int
    conditions: dict | None = None
    cmi: float | None = None
    blocks: list = field(default_factory=list)
    residual: float | None = None
    details: dict = field(default_factory=dict)
    message: str = ""
    timing: float | None = None

    def to_dict(self) -> dict:
        out = {"version": VERSION, "command": self.command, "status": self.status,
               "exit_code": self.exit_code, "conditions": self.conditions, "cmi": self.cmi,
               "blocks": self.blocks, "residual": self.residual, "details": self.details,
               "message": self.message}
        if self.timing is not None:
            out["timing"] = self.timing
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


REPORT_FIELDS = ("command", "status", "exit_code", "conditions", "cmi", "blocks", "residual",
                 "details", "message", "timing")


def parse_report(text: str) -> Report:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"report:{exc.lineno}:{exc.colno}") from None
    if not isinstance(data, dict) or data.get("version") != VERSION:
        raise ParseError("not a version 1 report", "version")
    for key in ("command", "status", "exit_code"):
        if key not in data:
            raise ParseError(f"missing field {key!r}", "report")
    return Report(**{k: data[k] for k in REPORT_FIELDS if k in data})
