"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from .config import ScenarioConfig
from .errors import ConfigError, StorageCoopError
from .experiments import run_experiment, write_tables

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("storagecoop")


def _parser():
    parser = argparse.ArgumentParser(
        prog="storagecoop",
        description="Run storage-fleet market experiments and write CSV tables.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment named in the config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides output_dir)")

    bargain = sub.add_parser("bargain", help="Nash bargaining deal for every storage")
    bargain.add_argument("--config", required=True)
    bargain.add_argument("--out", help="output directory (overrides output_dir)")
    bargain.add_argument("--delta", type=float, help="override the discount factor")

    validate = sub.add_parser("validate", help="check a config and print its normalized form")
    validate.add_argument("--config", required=True)
    return parser


def _execute(cfg, out):
    out = out or cfg.output_dir
    if out is None:
        raise ConfigError("no output directory: pass --out or set output_dir")
    for path in write_tables(run_experiment(cfg), out):
        print(path)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    # plain-text logs only, so NO_COLOR needs no special handling beyond this
    fmt = "%(levelname)s %(name)s: %(message)s" if os.environ.get("NO_COLOR") is None else "%(levelname)s: %(message)s"
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format=fmt)
    try:
        cfg = ScenarioConfig.load(args.config)
        if args.command == "validate":
            cfg.build_market()
            if cfg.fleet is not None:
                cfg.build_fleet()
            sys.stdout.write(cfg.dumps())
        elif args.command == "run":
            _execute(cfg, args.out)
        else:
            changes = {"experiment": "bargain"}
            if args.delta is not None:
                if not 0 < args.delta < 1:
                    raise ConfigError("delta must lie in (0, 1)")
                changes["delta"] = args.delta
            _execute(dataclasses.replace(cfg, **changes), args.out)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (StorageCoopError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
