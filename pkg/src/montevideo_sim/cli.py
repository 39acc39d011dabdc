#!/usr/bin/env python3
"""
Command-line front end for montevideo-sim.

Each sub-command runs one experiment from a JSON configuration and writes
CSV, JSON and optionally SVG artifacts into the output directory.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, NoReturn, Optional

from . import __version__
from .config import RuntimeSettings, load_config
from .errors import MontevideoError, UsageError
from .experiments import default_registry, run

logger = logging.getLogger("montevideo_sim")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports misuse as a UsageError."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(message)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="montevideo-sim",
        description="Real-clock quantum mechanics simulations",
    )
    parser.add_argument("--version", action="version", version=__version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="Experiment JSON file")
    common.add_argument("--out-dir", type=Path, default=None, help="Directory for artifacts")
    common.add_argument("--seed", type=int, default=None, help="Override the configured seed")
    common.add_argument("--svg", action="store_true", help="Also write an SVG plot")
    common.add_argument("--workers", type=int, default=None, help="Worker processes for sweeps")
    common.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging level (default: INFO)",
    )

    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True
    for experiment in (default_registry().get(name) for name in default_registry().names()):
        commands.add_parser(experiment.name, parents=[common], help=experiment.description)
    return parser


def fail(error: MontevideoError) -> NoReturn:
    message = error.message if not error.context else f"{error.context}: {error.message}"
    print(f"error[{error.code}]: {' '.join(message.split())}", file=sys.stderr)
    sys.exit(error.exit_code)


def main(argv: Optional[List[str]] = None) -> None:
    """Run montevideo-sim."""
    try:
        args = build_parser().parse_args(argv)
        settings = RuntimeSettings.from_env()
        if args.out_dir is not None:
            settings.out_dir = args.out_dir
        if args.workers is not None:
            settings = RuntimeSettings(settings.out_dir, args.workers, settings.log_level)
        if args.log_level is not None:
            settings.log_level = args.log_level
    except MontevideoError as e:
        fail(e)

    logging.basicConfig(level=getattr(logging, settings.log_level), format=LOG_FORMAT)
    logger.info(f"Starting {args.command} with config {args.config}")

    try:
        config = load_config(args.config, seed=args.seed)
        if config.experiment != args.command:
            raise UsageError(
                f"{args.config} configures {config.experiment!r}, not {args.command!r}"
            )
        artifacts = run(
            config, out_dir=settings.out_dir, svg=args.svg, workers=settings.workers
        )
    except MontevideoError as e:
        logger.error(f"{args.command} failed: {e}")
        fail(e)
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}")
        print(f"error[internal_error]: {' '.join(str(e).split())}", file=sys.stderr)
        sys.exit(1)

    for kind, path in artifacts.paths.items():
        logger.info(f"Wrote {kind} to {path}")


if __name__ == "__main__":
    main()
