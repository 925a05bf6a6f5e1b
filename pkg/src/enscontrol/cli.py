"""Command-line entry point.

One subcommand per experiment kind; flags override config-file values.
Exit codes: 0 success, 2 configuration or parse error, 3 numerical
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .averaging import NonConvergenceError
from .experiments import (
    EXPERIMENT_KINDS,
    ConfigError,
    config_from_mapping,
    parse_config_file,
    run_experiment,
)
from .matio import ParseError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="enscontrol",
        description=(
            "Seeded experiments for sampled-ensemble estimation, control "
            "synthesis, trajectory tracking, reachability checks and "
            "deviation-bound verification of discrete-time linear systems."
        ),
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    helps = {
        "estimate": "estimation error of sampled initial state and state map",
        "control": "one-step control synthesis error",
        "track": "multi-step reference tracking error",
        "reach": "simplex-constrained reachability report",
        "bounds": "empirical deviation frequencies against closed-form bounds",
    }
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=helps[kind])
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--methods", help="comma list from uniform,alse,slse")
        p.add_argument("--samples", help="comma list of sample counts")
        p.add_argument("--trials", type=int, help="repetitions per grid point")
        p.add_argument(
            "--plot", action="store_true", default=None,
            help="also render plot.svg next to records.csv",
        )
        p.add_argument(
            "--hoeffding-constant", type=int, choices=(2, 4), dest="hoeffding_constant",
            help="exponent constant of the deviation bound",
        )
        p.add_argument("--workers", type=int, help="parallel trial workers")
        p.add_argument("--verbose", action="store_true", help="info-level logging")
    return parser


_OVERRIDES = (
    ("seed", "seed"),
    ("out", "out_dir"),
    ("methods", "methods"),
    ("samples", "samples"),
    ("trials", "trials"),
    ("plot", "plot"),
    ("hoeffding_constant", "hoeffding_constant"),
    ("workers", "workers"),
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    mapping: dict = {}
    try:
        if args.config:
            mapping.update(parse_config_file(args.config))
        mapping["kind"] = args.kind
        for arg_name, key in _OVERRIDES:
            value = getattr(args, arg_name)
            if value is not None:
                mapping[key] = str(value) if not isinstance(value, bool) else str(value).lower()
        cfg = config_from_mapping(mapping)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        outputs = run_experiment(cfg)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO

    report = outputs.pop("_report_obj", None)
    outputs.pop("_records", None)
    if report is not None:
        print(report.to_text(), end="")
    for name, path in sorted(outputs.items()):
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
