"""Command-line front end.

Exit codes: 0 all checks passed, 1 a scientific check failed, 2 configuration
error (including invalid search brackets), 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import yaml

from . import experiments, io
from .solver import SolverError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
WORKERS_ENV = "SITWAVE_WORKERS"

SUBCOMMANDS = {
    "simulate": ("simulate",),
    "figure1": ("figure1",),
    "speed": ("speed",),
    "verify": ("verify_constructions",),
    "search": ("search_amplitude", "search_speed"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sitwave", description="Sterile-insect release fronts: simulations and checks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML experiment configuration")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--workers", type=int, help=f"worker processes (also {WORKERS_ENV})")
    return parser


def _load(args) -> io.ExperimentConfig:
    allowed = SUBCOMMANDS[args.command]
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise io.ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise io.ConfigError(f"invalid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise io.ConfigError("configuration must be a mapping")
    raw.setdefault("kind", allowed[0])
    if raw["kind"] not in allowed:
        raise io.ConfigError(f"'{args.command}' cannot run an experiment of kind {raw['kind']!r}")
    if args.out:
        raw["out"] = args.out
    workers = args.workers if args.workers is not None else os.environ.get(WORKERS_ENV)
    if workers is not None:
        raw["workers"] = workers
    return io.config_from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        result = experiments.run(cfg)
    except io.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # rejected inputs: invalid brackets, R <= 1, c >= 0, ...
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(result.report)
    return EXIT_OK if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
