"""Command-line entry point: ``teamjam {allocate,simulate,check,sweep}``."""

from __future__ import annotations

import argparse
import sys

from . import scenario
from .errors import ConfigError, TeamJamError


def _range(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(":")
        n = int(n)
        if n < 1:
            raise ValueError
        return float(lo), float(hi), n
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI:N, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teamjam", description="Two-team jamming game solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="solve the static allocation game at the initial geometry")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="run the differential game and write a trace")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=("saddle", "myopic"))

    p = sub.add_parser("check", help="evaluate the unique-equilibrium sufficient condition")
    p.add_argument("--config", required=True)

    p = sub.add_parser("sweep", help="simulate a family of configs varying one key")
    p.add_argument("--config", required=True)
    p.add_argument("--vary", required=True, metavar="KEY")
    p.add_argument("--range", required=True, type=_range, metavar="LO:HI:N")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("saddle", "myopic"))
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return scenario.EXIT_INPUT if exc.code else scenario.EXIT_OK
    try:
        config = scenario.load_config(args.config)
        if args.command == "allocate":
            return scenario.cmd_allocate(config, args.out)
        if args.command == "simulate":
            return scenario.cmd_simulate(config, args.out, args.mode)
        if args.command == "check":
            return scenario.cmd_check(config)
        lo, hi, n = args.range
        return scenario.cmd_sweep(config, args.vary, lo, hi, n, args.out, args.mode, args.jobs)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return scenario.EXIT_INPUT
    except TeamJamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return scenario.EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
