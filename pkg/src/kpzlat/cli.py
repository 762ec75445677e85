"""Command-line entry point.

Exit codes: 0 success, 1 failed audit/check, 2 configuration error,
3 numerical blow-up during integration.
"""

import argparse
import os
import sys

from . import harness
from .config import ConfigError, load_config
from .lattice import LatticeBlowupError
from .sbe import SbeBlowupError

COMMANDS = {
    "tensors": harness.cmd_tensors,
    "check-potential": harness.cmd_check_potential,
    "sample": harness.cmd_sample,
    "simulate": harness.cmd_simulate,
    "fields": harness.cmd_fields,
    "bg-test": harness.cmd_bg_test,
    "sbe": harness.cmd_sbe,
    "compare": harness.cmd_compare,
    "sweep": harness.cmd_sweep,
}

_HELP = {
    "tensors": "drift tensors, frame matrices, and constraint residuals",
    "check-potential": "structural audit of the configured potential",
    "sample": "draw site-marginal samples and run identity checks",
    "simulate": "integrate the lattice ensemble and dump snapshots",
    "fields": "fluctuation-field decomposition along a run",
    "bg-test": "window sweep of the second-order replacement statistic",
    "sbe": "spectral Burgers ensemble (limit dynamics)",
    "compare": "lattice vs spectral autocovariance comparison",
    "sweep": "partition-integral scan across noise scales",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kpzlat",
        description="Simulation and verification toolkit for coupled "
        "fluctuating-lattice systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", default=None, help="INI configuration file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            dest="overrides",
            help="override a configuration value (repeatable)",
        )
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override run seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads (default: KPZLAT_THREADS or 1)",
        )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.seed is not None:
            cfg.values["run"]["seed"] = int(args.seed)
        threads = args.threads
        if threads is None:
            threads = int(os.environ.get("KPZLAT_THREADS", "1"))
        return COMMANDS[args.command](cfg, args.out, threads=threads)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (LatticeBlowupError, SbeBlowupError) as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
