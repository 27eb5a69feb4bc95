# -*- coding: utf-8 -*-
"""
Command-line entry point for the KV-MemNN question answering toolkit.

Loads settings from config.ini (creating it with defaults when missing),
applies `--set Section.key=value` overrides, configures logging to file and
console, and dispatches to the subcommands: generate, train, eval, inspect
and ladder.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(missing/malformed corpus or checkpoint), 3 numerical failure.
"""

import argparse
import configparser
import logging
import sys
from typing import List, Optional

from checkpoint import CheckpointError
from commands import COMMAND_MODULES
from config import load_config
from utils import CorpusFormatError

# --- Constants ---
CONFIG_FILE = 'config.ini'
LOG_FILE = 'kvmemnn.log'

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger(__name__)


class UsageError(ValueError):
    """Bad command-line arguments."""


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- Logging Setup ---
def setup_logging(log_file: str = LOG_FILE, level: int = logging.INFO):
    """File handler (full format, overwritten each run) plus a simpler console handler."""
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(levelname)s - [%(module)s:%(funcName)s:%(lineno)d] - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        handlers=[
            logging.FileHandler(log_file, mode='w'),
            logging.StreamHandler(sys.stdout)
        ],
        force=True,
    )
    console_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - [%(module)s] - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    for handler in logging.getLogger().handlers:
        if not isinstance(handler, logging.FileHandler):
            handler.setFormatter(console_formatter)


def reconfigure_level(level: int):
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    for handler in root_logger.handlers:
        handler.setLevel(level)
    logger.info(f"Logging reconfigured. Root logger level set to: {logging.getLevelName(root_logger.getEffectiveLevel())}")


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(prog='kvmemnn', description="Key-Value Memory Network question answering")
    parser.add_argument('--config', default=CONFIG_FILE, help="Settings file (created with defaults if missing)")
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='SECTION.KEY=VALUE',
                        help="Override one setting; repeatable")
    parser.add_argument('--log-file', default=LOG_FILE)
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND', parser_class=CommandParser)
    subparsers.required = True
    for module in COMMAND_MODULES:
        module.register(subparsers)
        logger.debug(f"Registered command module '{module.__name__}'")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parses arguments, runs one subcommand and maps failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)

    setup_logging(args.log_file)
    try:
        settings = load_config(args.config, args.overrides)
    except (ValueError, configparser.Error) as e:
        logger.error(f"FATAL: Could not load or validate configuration from {args.config}. Error: {e}", exc_info=True)
        print(f"FATAL ERROR loading configuration: {e}. Check logs ({args.log_file}).", file=sys.stderr)
        return EXIT_USAGE
    reconfigure_level(settings['log_level_value'])

    logger.info(f"Running command '{args.command}'")
    try:
        return args.func(args, settings)
    except (CorpusFormatError, CheckpointError, FileNotFoundError) as e:
        logger.error(f"Data error: {e}", exc_info=True)
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as e:
        logger.error(f"Numerical failure: {e}", exc_info=True)
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"Invalid input: {e}", exc_info=True)
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"I/O error: {e}", exc_info=True)
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == '__main__':
    sys.exit(main())
