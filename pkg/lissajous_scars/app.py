"""Command-line entry point for the Lissajous scars laboratory."""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .analysis.spectrum import SpectrumSource
from .errors import ArchiveError, ConfigError, GridError, NumericalError, OrbitError
from .runner.pipeline import cmd_analyze, cmd_export, cmd_scan, cmd_solve
from .utils.logger import setup_logger
from .utils.settings import RunConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class UsageError(Exception):
    """Bad command line or configuration."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; usage errors here are 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lissajous-scars", description="Quantum Lissajous scars numerical laboratory")
    parser.add_argument("--log-dir", type=Path, default=None, help="Also write a DEBUG log file here")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a configuration key, e.g. --set itp.k=50")
    common.add_argument("--output", type=Path, default=None, help="Output directory (overrides output_dir)")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("solve", parents=[common], help="Solve for the lowest eigenstates")

    analyze = sub.add_parser("analyze", parents=[common], help="Scar survey of an archive")
    analyze.add_argument("archive", type=Path)
    analyze.add_argument("--image", dest="images", type=int, action="append", default=[],
                         help="Also export the density image of this state index")

    scan = sub.add_parser("scan", parents=[common], help="Frequency-ratio or deviation scan")
    scan.add_argument("mode", choices=["ratio", "deviation"])
    scan.add_argument("--values", type=_float_list, default=None, help="Comma-separated scan points")
    scan.add_argument("--source", choices=[s.value for s in SpectrumSource], default="analytic")

    export = sub.add_parser("export", parents=[common], help="Export orbit, oracle or report files")
    export.add_argument("target", choices=["orbit", "oracle", "report"])
    export.add_argument("--file", type=Path, default=None, help="Output file name")
    export.add_argument("--p", type=int, default=None)
    export.add_argument("--q", type=int, default=None)
    export.add_argument("--energy", type=float, default=None)
    export.add_argument("--eta", type=float, default=0.5)
    export.add_argument("--phi", type=float, default=0.0)
    export.add_argument("--samples", type=int, default=None)
    export.add_argument("--e-cut", type=float, default=None)
    export.add_argument("--states", type=int, default=None)
    export.add_argument("--run-dir", type=Path, default=None)
    return parser


def load_config(args) -> RunConfig:
    """Config file (or defaults) with --set and --output applied."""
    if args.config is not None:
        if not args.config.exists():
            raise UsageError(f"configuration file not found: {args.config}")
        config = RunConfig.load(args.config)
    else:
        config = RunConfig()
    overrides = list(args.overrides)
    if args.output is not None:
        overrides.append(f"output_dir={args.output}")
    return config.with_overrides(overrides)


def _dispatch(args, config: RunConfig, logger) -> int:
    if args.command == "solve":
        outcome = cmd_solve(config)
        if not outcome.all_converged:
            logger.error(f"Unconverged states; partial outputs in {outcome.output_dir}")
            return EXIT_NUMERICAL
        return EXIT_OK

    if args.command == "analyze":
        cmd_analyze(args.archive, config, args.images)
        return EXIT_OK

    if args.command == "scan":
        cmd_scan(config, args.mode, args.values, SpectrumSource(args.source))
        return EXIT_OK

    options = {}
    if args.target == "orbit":
        if args.energy is None:
            raise UsageError("export orbit needs --energy")
        options = dict(p=args.p, q=args.q, energy=args.energy, eta=args.eta, phi=args.phi, samples=args.samples)
    elif args.target == "oracle":
        if args.e_cut is None:
            raise UsageError("export oracle needs --e-cut")
        options = dict(e_cut=args.e_cut, states=args.states)
    else:
        options = dict(run_dir=args.run_dir)
    path = cmd_export(args.target, config, args.file, **options)
    logger.info(f"Exported {path}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and return the exit status.

    0 success, 1 usage or configuration error, 2 numerical failure
    (including unconverged states), 3 I/O error.
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    logger = setup_logger(log_dir=args.log_dir)
    logger.info(f"Starting lissajous-scars {args.command}")

    try:
        config = load_config(args)
    except (UsageError, ConfigError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"Cannot read configuration: {e}")
        return EXIT_IO

    try:
        return _dispatch(args, config, logger)
    except (UsageError, ConfigError, OrbitError, GridError) as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}", exc_info=True)
        return EXIT_NUMERICAL
    except (ArchiveError, OSError) as e:
        logger.error(f"I/O error: {e}", exc_info=True)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
