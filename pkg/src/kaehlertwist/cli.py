"""Command line entry point: ``kaehlertwist run | list-models | list-scenarios``."""

from __future__ import annotations

import argparse
import sys

from .kaehler import MODEL_FACTORIES
from .report import emit_csv, to_json, write_json
from .scenario import ConfigError, bundled_path, bundled_scenarios, load_config, run

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

# failures while assembling an instance (positivity, preconditions, degenerate frames)
BUILD_ERRORS = (ValueError, ArithmeticError, KeyError, TypeError)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kaehlertwist", description="Residual checks for local Weinstein Kähler structures.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config (a path or a bundled scenario name)")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--samples", type=int)
    r.add_argument("--tol-scale", type=float)
    r.add_argument("--report", help="write the JSON report here instead of stdout")
    r.add_argument("--csv", help="directory for per-check CSV files")
    sub.add_parser("list-models", help="catalog model names")
    sub.add_parser("list-scenarios", help="bundled scenario names")
    return p


def _run(args) -> int:
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.samples, args.tol_scale)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        result = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except BUILD_ERRORS as exc:
        print(f"build error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        if args.report:
            write_json(result, args.report)
        else:
            sys.stdout.write(to_json(result))
        if args.csv:
            emit_csv(result, args.csv)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_ERROR
    rep = result.report
    failures = rep.failures()
    status = "PASS" if not failures else "FAIL"
    print(f"{status} {cfg.name}: {len(rep.records) - len(failures)}/{len(rep.records)} checks", file=sys.stderr)
    for r in failures:
        print(f"  {r.check_id}: {r.statistic:.3e} {r.comparator} {r.tolerance:.1e} at {r.witness.tolist()}", file=sys.stderr)
    return EXIT_PASS if not failures else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        return _run(args)
    if args.command == "list-models":
        for name in sorted(MODEL_FACTORIES):
            print(name)
    else:
        for name in bundled_scenarios():
            print(f"{name}\t{bundled_path(name)}")
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
