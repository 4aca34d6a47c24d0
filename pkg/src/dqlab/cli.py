"""``dqlab`` command line: run, validate and print bundled demo scenarios.

Exit codes: 0 success, 2 validation failure, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import DQLabError, NumericalError, ValidationError
from .runner import TaskError, run
from .scenario import ScenarioIOError, load_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

DEMOS = ("two_quadrature", "dql_recovery", "memoryless_qcrb")


def demo_text(name: str) -> str:
    if name not in DEMOS:
        raise ValidationError(f"unknown demo {name!r} (available: {', '.join(DEMOS)})")
    return resources.files("dqlab.demos").joinpath(f"{name}.json").read_text(encoding="utf-8")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, TaskError):
        exc = exc.cause
    if isinstance(exc, ScenarioIOError) or isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, (NumericalError, ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    return EXIT_VALIDATION


def _load(path, args=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sc = load_scenario(path)
    if args is not None:
        changes = {}
        if args.seed is not None:
            if args.seed < 0:
                raise ValidationError("--seed must be non-negative")
            changes["seed"] = args.seed
        if args.hbar is not None:
            if not (args.hbar > 0 and np.isfinite(args.hbar)):
                raise ValidationError("--hbar must be a positive finite number")
            changes["hbar"] = args.hbar
        if changes:
            sc = replace(sc, **changes)
    return sc


def cmd_run(args) -> int:
    sc = _load(args.scenario, args)
    out = args.out if args.out is not None else _default_out(args.scenario, sc)
    manifest = run(sc, out)
    done = sum(t["status"] == "ok" for t in manifest["tasks"])
    print(f"{done} task(s) completed; results in {out}")
    return EXIT_OK


def _default_out(scenario_path, sc):
    p = Path(sc.output_dir)
    return p if p.is_absolute() else Path(scenario_path).parent / p


def cmd_validate(args) -> int:
    sc = _load(args.scenario)
    names = ", ".join(t.name for t in sc.tasks) or "none"
    print(f"valid: grid n={sc.grid.n}, tasks: {names}")
    for msg in sc.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return EXIT_OK


def cmd_demo(args) -> int:
    sys.stdout.write(demo_text(args.name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write its result bundle")
    p.add_argument("scenario")
    p.add_argument("--out", help="output directory (overrides the scenario's output_dir)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--hbar", type=float, help="override the scenario hbar")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="validate a scenario without computing anything")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("demo", help="print a bundled demo scenario")
    p.add_argument("name", choices=DEMOS)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DQLabError, OSError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        code = _exit_code(exc)
        label = {EXIT_VALIDATION: "validation error", EXIT_NUMERICAL: "numerical error",
                 EXIT_IO: "I/O error"}[code]
        print(f"dqlab: {label}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
