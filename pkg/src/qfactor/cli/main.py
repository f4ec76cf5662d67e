"""``qfactor`` command-line entry point.

Exit codes: 0 success, 2 a factorisation condition fails, 3 the factorisation
is impossible (non-Markov Choi state) or its certificate misses the tolerance,
4 the input file cannot be parsed or validated.
"""
from __future__ import annotations

import argparse
import sys
import time

from ..cpmaps import EPS_COND
from ..errors import (CertificateError, ConditionError, FactorisationImpossible,
                      QFactorError)
from ..factorise import EPS_FACT, check_conditions, factorise
from ..multimap import multi_factorise
from ..prbox import demonstrate_necessity
from ..tsirelson import factorise_observables
from .io import ParseError, Report, ValidationError, parse_instance

EXIT_OK = 0
EXIT_CONDITION = 2
EXIT_IMPOSSIBLE = 3
EXIT_INPUT = 4

COMMANDS = ("check", "factorise", "multi", "tsirelson", "prbox-demo")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qfactor",
                                description="Check and factorise commuting quantum operations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("instance", nargs="?", help="instance file (JSON, version 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("human", "json"), default="human")
    p.add_argument("--mode", choices=("strict", "weak"), default="strict",
                   help="commutation test for the tsirelson command")
    p.add_argument("--eps-cond", type=float, default=EPS_COND)
    p.add_argument("--eps-fact", type=float, default=EPS_FACT)
    p.add_argument("--force-factorise", action="store_true",
                   help="check: run the factorisation even if a condition fails")
    p.add_argument("--timing", action="store_true", help="include wall-clock time in the report")
    return p


def _blocks(cert) -> list:
    return [{"z": z, "d_a": b.d_a, "d_b": b.d_b, "weight": float(w)}
            for z, (b, w) in enumerate(zip(cert.decomposition.blocks, cert.block_weights))]


def _need_kind(loaded, kind: str, command: str):
    if loaded.kind != kind:
        raise ValidationError("kind", f"{command} needs a {kind!r} instance, got {loaded.kind!r}")


def _run_pair(args, command: str) -> Report:
    loaded = parse_instance(args.instance)
    _need_kind(loaded, "pair", command)
    inst = loaded.instance
    report = check_conditions(inst, args.eps_cond)
    conds = report.to_dict()
    if command == "check" and not args.force_factorise:
        if report.ok:
            return Report(command, "pass", EXIT_OK, conds, message="all conditions hold")
        return Report(command, "condition_failed", EXIT_CONDITION, conds,
                      message=f"conditions {', '.join(report.failed())} fail")
    try:
        cert = factorise(inst, eps_cond=args.eps_cond, eps_fact=args.eps_fact, seed=args.seed,
                         force=args.force_factorise)
    except ConditionError as exc:
        return Report(command, "condition_failed", EXIT_CONDITION, conds, message=str(exc))
    except FactorisationImpossible as exc:
        return Report(command, "impossible", EXIT_IMPOSSIBLE, conds, cmi=exc.cmi,
                      message=str(exc))
    except CertificateError as exc:
        return Report(command, "certificate_failed", EXIT_IMPOSSIBLE, conds,
                      residual=exc.residual, message=str(exc))
    return Report(command, "factorised", EXIT_OK, conds, cmi=cert.claim1_cmi,
                  blocks=_blocks(cert), residual=cert.residual,
                  details={"weak_path": cert.weak_path, "rescale": cert.rescale})


def _run_multi(args) -> Report:
    loaded = parse_instance(args.instance)
    _need_kind(loaded, "multi", "multi")
    try:
        res = multi_factorise(loaded.maps, eps_cond=args.eps_cond, eps_fact=args.eps_fact,
                              seed=args.seed)
    except ConditionError as exc:
        return Report("multi", "condition_failed", EXIT_CONDITION,
                      details={"stage": exc.stage, "failed": list(exc.failed)}, message=str(exc))
    except FactorisationImpossible as exc:
        return Report("multi", "impossible", EXIT_IMPOSSIBLE, cmi=exc.cmi,
                      details={"stage": exc.stage}, message=str(exc))
    except CertificateError as exc:
        return Report("multi", "certificate_failed", EXIT_IMPOSSIBLE, residual=exc.residual,
                      message=str(exc))
    stages = [{"stage": t, "blocks": _blocks(c), "residual": c.residual}
              for t, c in enumerate(res.stages, 1)]
    return Report("multi", "factorised", EXIT_OK, residual=res.residual,
                  details={"stages": stages, "chain_residuals": list(res.cond_residuals),
                           "copies": list(res.copy_labels)})


def _run_tsirelson(args) -> Report:
    loaded = parse_instance(args.instance)
    _need_kind(loaded, "families", "tsirelson")
    x, y = loaded.families
    try:
        fac = factorise_observables(x, y, mode=args.mode, eps_cond=args.eps_cond,
                                    eps_fact=args.eps_fact, seed=args.seed)
    except ConditionError as exc:
        return Report("tsirelson", "condition_failed", EXIT_CONDITION, message=str(exc))
    except FactorisationImpossible as exc:
        return Report("tsirelson", "impossible", EXIT_IMPOSSIBLE, cmi=exc.cmi, message=str(exc))
    except CertificateError as exc:
        return Report("tsirelson", "certificate_failed", EXIT_IMPOSSIBLE,
                      residual=exc.residual, message=str(exc))
    return Report("tsirelson", "factorised", EXIT_OK, blocks=_blocks(fac.certificate),
                  residual=fac.residual, cmi=fac.certificate.claim1_cmi,
                  details={"mode": fac.mode, "d_ka": fac.d_ka, "d_kb": fac.d_kb,
                           "residual_x": fac.residual_x, "residual_y": fac.residual_y,
                           "residual_xy": fac.residual_xy})


def _run_prbox(args) -> Report:
    rep = demonstrate_necessity(eps_cond=args.eps_cond, seed=args.seed)
    d = rep.to_dict()
    return Report("prbox-demo", "condition_failed", EXIT_CONDITION, d["conditions"],
                  cmi=rep.cmi,
                  details={"failed": d["failed"], "pr_win_prob": rep.pr_win_prob,
                           "classical_max": rep.classical_max,
                           "tsirelson_win": rep.tsirelson_win},
                  message="; ".join(rep.messages))


def run(argv=None) -> Report:
    """Parse ``argv`` and execute one command; never raises for documented failures."""
    return execute(build_parser().parse_args(argv))


def execute(args: argparse.Namespace) -> Report:
    start = time.perf_counter()
    try:
        if args.command != "prbox-demo" and args.instance is None:
            raise ParseError("an instance file is required", args.command)
        if args.command in ("check", "factorise"):
            report = _run_pair(args, args.command)
        elif args.command == "multi":
            report = _run_multi(args)
        elif args.command == "tsirelson":
            report = _run_tsirelson(args)
        else:
            report = _run_prbox(args)
    except (ParseError, ValidationError) as exc:
        report = Report(args.command, "invalid_input", EXIT_INPUT, message=str(exc))
    except QFactorError as exc:
        # remaining library errors come from invariants of the parsed objects
        report = Report(args.command, "invalid_input", EXIT_INPUT, message=str(exc))
    if args.timing:
        report.timing = time.perf_counter() - start
    return report


def format_human(report: Report) -> str:
    lines = [f"{report.command}: {report.status} (exit {report.exit_code})"]
    if report.message:
        lines.append(f"  {report.message}")
    if report.conditions:
        c = report.conditions
        lines.append(f"  (i)   residual {c['cond1_residual']:.3e}  {'ok' if c['cond1_ok'] else 'FAIL'}")
        lines.append(f"  (ii)  unital {c['cond2_unital_residual']:.3e}, weak "
                     f"{c['cond2_weak_unital_residual']:.3e}  {'ok' if c['cond2_ok'] else 'FAIL'}")
        lines.append(f"  (iii) residuals {c['cond3_m_residual']:.3e}, {c['cond3_n_residual']:.3e}"
                     f"  {'ok' if c['cond3_ok'] else 'FAIL'}")
    if report.cmi is not None:
        lines.append(f"  CMI {report.cmi:.6g} bits")
    if report.blocks:
        lines.append("  block  dA  dB  weight")
        for b in report.blocks:
            lines.append(f"  {b['z']:5d} {b['d_a']:3d} {b['d_b']:3d}  {b['weight']:.6f}")
    if report.residual is not None:
        lines.append(f"  residual {report.residual:.3e}")
    for key, value in report.details.items():
        if key == "stages":
            continue
        lines.append(f"  {key}: {value}")
    if report.timing is not None:
        lines.append(f"  time {report.timing:.3f} s")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report = execute(args)
    sys.stdout.write(report.to_json() if args.format == "json" else format_human(report))
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
