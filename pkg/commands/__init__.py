# -*- coding: utf-8 -*-
"""
Subcommand groups of the command-line entry point.

Each module exposes `register(subparsers)`, which adds its parser and binds
the handler as `func(args, settings) -> int`. app.py registers them in order.
"""

from commands import (eval_command, generate_command, inspect_command, ladder_command,
                      train_command)

COMMAND_MODULES = (generate_command, train_command, eval_command, inspect_command, ladder_command)

__all__ = ['COMMAND_MODULES']
