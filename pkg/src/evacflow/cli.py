"""Command line entry point.

    evacflow field|simulate|trace|report SCENARIO [--out DIR] [--override key=value]
    evacflow verify [--case NAME] [--seed N] [--out DIR]

Exit codes: 0 ok, 2 parse, 3 validation, 4 solver, 5 range/stability.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import EvacflowError, ScenarioSyntaxError, ValidationError

STAGE_COMMANDS = {
    "field": ("field",),
    "simulate": ("field", "simulate"),
    "trace": ("field", "trace"),
    "report": ("field", "simulate", "trace"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evacflow", description="Crowd evacuation potential, density and paths.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, stages in STAGE_COMMANDS.items():
        sp = sub.add_parser(name, help=f"run stages: {', '.join(stages)}")
        sp.add_argument("scenario", type=Path)
        sp.add_argument("--out", type=Path, default=None, help="output directory (default: ./out_<scenario>)")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    vp = sub.add_parser("verify", help="run the oracle suite")
    vp.add_argument("--case", action="append", default=None, help="case name (repeatable)")
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--out", type=Path, default=None, help="write verify_report.txt/.csv here")
    vp.add_argument("--list", action="store_true", help="list case names and exit")
    return p


def _run_stages(args) -> int:
    from .pipeline import run_pipeline
    from .scenario import parse_scenario

    try:
        text = args.scenario.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ScenarioSyntaxError(f"cannot read {args.scenario}: {e}") from None
    sc = parse_scenario(text, args.override)
    out = args.out or Path(f"out_{args.scenario.stem}")
    summary, _ = run_pipeline(sc, STAGE_COMMANDS[args.command], out, base_dir=args.scenario.parent)
    sys.stdout.write(summary.text())
    return 0


def _run_verify(args) -> int:
    from .verification import CASES, run_oracles

    if args.list:
        for name, case in CASES.items():
            print(f"{name}\t{case.kind}\t{case.certifies}")
        return 0
    if args.case:
        unknown = [c for c in args.case if c not in CASES]
        if unknown:
            raise ValidationError(violations=[("UnknownCase", f"unknown case {c!r}") for c in unknown])
    report = run_oracles(args.case, seed=args.seed)
    sys.stdout.write(report.text())
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "verify_report.txt").write_text(report.text(), encoding="utf-8")
        (args.out / "verify_report.csv").write_text(report.csv(), encoding="utf-8")
    return 0 if report.passed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return _run_verify(args)
        return _run_stages(args)
    except EvacflowError as e:
        name = type(e).__name__
        if isinstance(e, ValidationError):
            for rule, msg in e.violations:
                print(f"error: {rule}: {msg}", file=sys.stderr)
        else:
            print(f"error: {name}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
