"""Regenerate the reference instance files in ``instances/``.

Usage: ``python3 scripts/make_instances.py [outdir]``
"""
import sys
from pathlib import Path

import numpy as np

from qfactor.cli.io import write_instance
from qfactor.cpmaps import CPMap, compress_kraus
from qfactor.factorise import FactorisationInstance
from qfactor.prbox import build_pr_maps, demonstrate_necessity
from qfactor.synthetic import converse_instance, multi_converse_maps
from qfactor.tensor import SystemLayout


def trivial_instance() -> FactorisationInstance:
    """``M`` prepares ``|0>`` on ``A`` and leaves ``H`` alone; ``N`` prepares ``|0>`` on ``B``."""
    h = SystemLayout((("I", 2), ("K", 2), ("J", 2)))
    zero = np.array([[1.0], [0.0]])
    m = CPMap(np.kron(zero, np.eye(8))[None], h, SystemLayout((("A", 2),)) + h)
    n_ops = [zero @ np.eye(8)[x:x + 1] for x in range(8)]
    n = CPMap(np.array(n_ops), h, SystemLayout((("B", 2),)))
    return FactorisationInstance(m, n)


def pauli_families():
    i2 = np.eye(2)
    z = np.diag([1.0, -1.0])
    x = np.array([[0.0, 1.0], [1.0, 0.0]])

    def family(left: bool):
        out = []
        for p in (z, x):
            projs = [(i2 + p) / 2, (i2 - p) / 2]
            out.append([np.kron(q, i2) if left else np.kron(i2, q) for q in projs])
        return out

    return family(True), family(False)


def main(outdir="instances"):
    out = Path(outdir)
    out.mkdir(exist_ok=True)
    write_instance(out / "trivial.json", trivial_instance())
    rep = demonstrate_necessity()
    write_instance(out / "pr.json", build_pr_maps(), expected={
        "failed": list(rep.failed),
        "cmi_bits": rep.cmi,
        "cmi_bits_exact": "1/5",
        "pr_win_prob": 1.0,
        "classical_max": rep.classical_max,
        "tsirelson_win": rep.tsirelson_win,
    })
    conv = converse_instance([(2, 1), (1, 2)], np.random.default_rng(7))
    conv = FactorisationInstance(compress_kraus(conv.m, force=True),
                                 compress_kraus(conv.n, force=True))
    write_instance(out / "converse.json", conv,
                   expected={"blocks": [[2, 1], [1, 2]]})
    write_instance(out / "pauli.json", pauli_families())
    write_instance(out / "multi.json", multi_converse_maps([(1, 2, 2)], np.random.default_rng(3)))
    write_instance(out / "signalling.json",
                   multi_converse_maps([(1, 2, 2)], np.random.default_rng(3),
                                       signalling_stage=2),
                   expected={"stage": 2})


if __name__ == "__main__":
    main(*sys.argv[1:])
