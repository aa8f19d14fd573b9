from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import logger
from .campaign import run_campaign
from .custom_logging import add_file_handler, run_with_temporary_logging
from .exceptions import BundleError, ConfigError
from .report import FORMATS, render

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hardy-lab",
        description="Certification campaigns for local Hardy spaces on discrete Ahlfors-regular spaces",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a campaign file and write its bundle")
    run.add_argument("config", help="Campaign INI file")
    run.add_argument("--fail-fast", action="store_true", help="Stop at the first stage that does not pass")
    run.add_argument("--out", default=None, help="Bundle directory (default: <data_root>/bundles/<name>)")
    run.add_argument("--log", default=None, help="Also write the log to this file")
    run.add_argument("--quiet", action="store_true", help="Only log warnings and errors")

    report = commands.add_parser("report", help="Render a bundle")
    report.add_argument("bundle", help="Bundle directory or its summary.json")
    report.add_argument("--format", choices=FORMATS, default="md")
    return parser


def _run(args) -> int:
    with run_with_temporary_logging(logger, level=logging.WARNING if args.quiet else None):
        if args.log:
            add_file_handler(logger, args.log)
        try:
            summary = run_campaign(args.config, out_dir=args.out, fail_fast=True if args.fail_fast else None)
        except ConfigError as e:
            logger.error(f"Config error: {e}")
            return EXIT_CONFIG
    return EXIT_OK if summary["passed"] else EXIT_ASSERTION


def _report(args) -> int:
    try:
        text = render(args.bundle, args.format)
    except BundleError as e:
        logger.error(f"Bundle error: {e}")
        return EXIT_CONFIG
    sys.stdout.write(text)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        return _run(args)
    return _report(args)


if __name__ == "__main__":
    sys.exit(main())
