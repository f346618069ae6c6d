"""``rmu`` command line: run, sweep, diagnose, validate-rm, solve.

Exit codes: 0 success, 1 configuration or input error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

from rmu.dsl import RmParseError, parse_rm
from rmu.harness.config import ConfigError, load_config
from rmu.harness.diagnostic import run_belief_diagnostic
from rmu.harness.io import emit_results
from rmu.harness.sweep import run_curves, run_sweep, solve_oracles
from rmu.machine import validate_rm

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (overrides [train] seed)")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="parallel worker processes")
    return p


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = argparse.ArgumentParser(prog="rmu", parents=[flags],
                                     description="Reward machines under uncertain labelling.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("run", "train every configured tracker and print learning curves"),
                        ("sweep", "final returns for every (tracker, epsilon, seed) cell"),
                        ("diagnose", "belief accuracy against the exact filter"),
                        ("solve", "value-iteration oracles")]:
        p = sub.add_parser(name, parents=[flags], help=help_)
        p.add_argument("config")
    p = sub.add_parser("validate-rm", parents=[flags], help="parse and lint a reward machine file")
    p.add_argument("file")
    return parser


def _emit(rows, cfg) -> None:
    text = emit_results(rows, cfg.output, cfg.format)
    if cfg.output is None:
        sys.stdout.write(text)


def _validate(path: str) -> int:
    try:
        with open(path, encoding="utf-8") as fh:
            rm = parse_rm(fh.read())
    except OSError as err:
        print(f"rmu: cannot read {path}: {err.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except RmParseError as err:
        print(f"{path}:{err}", file=sys.stderr)
        return EXIT_CONFIG
    diags = validate_rm(rm)
    print(f"{path}: {rm.n_states} states, {len(rm.terminals)} terminals, "
          f"{rm.edge_count()} edges (with defaults)")
    for d in diags:
        print(f"{d.level}: {d.code}: {d.message}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate-rm":
        return _validate(args.file)
    try:
        cfg = load_config(args.config).with_overrides(
            seed=getattr(args, "seed", None), out=getattr(args, "out", None),
            fmt=getattr(args, "format", None), workers=getattr(args, "workers", None))
    except ConfigError as err:
        print(f"rmu: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            rows = run_curves(cfg)
        elif args.command == "sweep":
            rows = run_sweep(cfg)
        elif args.command == "diagnose":
            rows = run_belief_diagnostic(cfg)
        else:
            rows = solve_oracles(cfg)
        _emit(rows, cfg)
    except ConfigError as err:
        print(f"rmu: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:  # runtime failures map to exit code 2
        print(f"rmu: error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
