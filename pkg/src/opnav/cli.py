"""Command-line entry point: ``opnav {synth,posdet,ekf,report} --config ...``.

Errors are reported on stderr as one line ``opnav: error: <Kind>: <message>``
with a non-zero exit status (1 runtime, 2 usage, 3 config, 4 I/O).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import io
from .config import load_config
from .errors import ConfigError, OpnavError
from .scenario import report, run_scenario, synthesize

EXIT_RUNTIME, EXIT_USAGE, EXIT_CONFIG, EXIT_IO = 1, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario TOML file or shipped scenario name")
    common.add_argument("--out", help="output directory (default: the config's output.dir)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for trials/runs")
    common.add_argument("--trials", type=int, help="posdet Monte-Carlo trials / number of filter runs")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="count", default=0)
    verbosity.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="opnav", description="Deep-space LOS navigation simulator")
    sub = parser.add_subparsers(dest="command", metavar="{synth,posdet,ekf,report}")
    sub.required = True
    sub.add_parser("synth", parents=[common], help="write the synthesized measurement CSV(s) only")
    p = sub.add_parser("posdet", parents=[common], help="snapshot position fixes")
    p.add_argument("--measurements", help="solve an existing measurement CSV instead of synthesizing")
    sub.add_parser("ekf", parents=[common], help="run the EKF tracking campaign")
    sub.add_parser("report", parents=[common], help="recompute summary statistics from existing CSVs")
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    print(f"opnav: error: {kind}: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def dispatch(args: argparse.Namespace) -> int:
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        return _fail("UsageError", "--jobs must be >= 1", EXIT_USAGE)
    if args.trials is not None and args.trials < 1:
        return _fail("UsageError", "--trials must be >= 1", EXIT_USAGE)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            config = replace(config, seed=args.seed, noise=replace(config.noise, seed=args.seed))
        out = args.out or config.output_dir
        if args.command == "synth":
            for path in synthesize(config, out, args.trials, args.jobs):
                print(path)
            return 0
        if args.command in ("posdet", "ekf"):
            if args.command == "ekf" and config.schedule_options is None:
                raise ConfigError("schedule: required for 'ekf'")
            summary = run_scenario(
                config, args.command, out, args.jobs, args.trials,
                getattr(args, "measurements", None),
            )
        else:
            summary = report(config, out, args.trials)
            with open(f"{out}/report_summary.txt", "w") as fh:
                fh.write(io.format_summary(summary))
        if not args.quiet:
            sys.stdout.write(io.format_summary(summary))
        return 0
    except ConfigError as exc:
        return _fail("ConfigError", exc, EXIT_CONFIG)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        return _fail("IOError", exc, EXIT_IO)
    except OpnavError as exc:
        return _fail(type(exc).__name__, exc, EXIT_RUNTIME)
    except (ValueError, OSError) as exc:
        return _fail(type(exc).__name__, exc, EXIT_RUNTIME)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
