import argparse
import logging
import sys
from typing import Sequence

from .registry import COMMANDS_TO_REGISTER
from .utils import EXIT_OK, EXIT_USAGE, ExitCode, defer, with_defers

LOG_FORMAT = "[mint_tta] %(levelname)s: %(message)s"


def configure_logging(verbose: bool):
    """Installs the stderr handler on the package logger until the enclosing `with_defers` call returns"""
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))

    package_logger = logging.getLogger(__package__)
    previous = (package_logger.handlers[:], package_logger.level, package_logger.propagate)

    def restore():
        package_logger.handlers[:], package_logger.level, package_logger.propagate = previous

    package_logger.handlers[:] = [handler]
    package_logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    package_logger.propagate = False
    defer(restore)


def build_parser() -> argparse.ArgumentParser:
    from . import commands as _

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; unknown keys are rejected")
    common.add_argument("--seed", type=int, help="master seed overriding the configuration")
    common.add_argument("--out", help="output directory overriding the configuration")
    common.add_argument("--verbose", action="store_true", help="log per-episode details")

    parser = argparse.ArgumentParser(
        prog="mint-tta",
        description="Memory-infused prompt tuning at test time on a synthetic distribution-shift benchmark",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    for command in COMMANDS_TO_REGISTER.values():
        subparser = subparsers.add_parser(command.name, help=command.help, parents=[common])
        if command.configure is not None:
            command.configure(subparser)
        subparser.set_defaults(run=command.run)

    return parser


@with_defers
def main(argv: Sequence[str] | None = None) -> ExitCode:
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except SystemExit as exit:
        # argparse already printed the usage message
        return EXIT_OK if not exit.code else EXIT_USAGE

    configure_logging(args.verbose)
    return args.run(args)
