"""Command-line entry point.

Subcommands: forward, test, reconstruct, combined, score, all.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import (
    ConfigError,
    FactorizationFailureError,
    NumericalFailureError,
)
from .fileio import read_pgm
from .pipeline import StageFailure, compute_forward, run_experiment, score_jaccard

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="configuration file (defaults built in)")
    parser.add_argument("--seed", type=int, metavar="N", help="override the noise seed")
    parser.add_argument("--jobs", type=int, metavar="N", help="cap worker threads")
    parser.add_argument("--out", metavar="DIR", default="elastomo_out", help="output directory")


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.noise_seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elastomo",
        description="Support reconstruction for elastic-parameter anomalies "
        "from boundary measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="generate mesh, NtD matrices and gap data")
    _add_common(p)
    p = sub.add_parser("test", help="linearized monotonicity ball test")
    _add_common(p)
    p = sub.add_parser("reconstruct", help="monotonicity-constrained least squares")
    _add_common(p)
    p = sub.add_parser("combined", help="constrained least squares with TSVD truncation")
    _add_common(p)
    p = sub.add_parser("all", help="run every method into subdirectories")
    _add_common(p)

    p = sub.add_parser("score", help="Jaccard index of two mask PGM files")
    p.add_argument("mask", metavar="MASK_PGM")
    p.add_argument("truth", metavar="TRUTH_PGM")
    return parser


_METHOD_FOR_COMMAND = {
    "test": "mono_test",
    "reconstruct": "constrained",
    "combined": "combined",
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "score":
            mask = read_pgm(args.mask) > 127
            truth = read_pgm(args.truth) > 127
            print(repr(score_jaccard(mask, truth)))
            return 0

        cfg = _load(args)
        if args.command == "forward":
            os.makedirs(args.out, exist_ok=True)
            fwd = compute_forward(cfg, args.out)
            print(f"forward data written to {args.out} "
                  f"(|U|_F={np.linalg.norm(fwd.gap)!r})")
            return 0
        if args.command == "all":
            for method in ("mono_test", "constrained", "combined"):
                cfg.method = method
                sub_out = os.path.join(args.out, method)
                scores = run_experiment(cfg, sub_out)
                for name, value in sorted(scores.items()):
                    print(f"{method}: {name} jaccard={value!r}")
            return 0

        cfg.method = _METHOD_FOR_COMMAND[args.command]
        scores = run_experiment(cfg, args.out)
        for name, value in sorted(scores.items()):
            print(f"{name} jaccard={value!r}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageFailure as exc:
        if isinstance(exc.cause, (NumericalFailureError, FactorizationFailureError)):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        if isinstance(exc.cause, ConfigError):
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailureError, FactorizationFailureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
