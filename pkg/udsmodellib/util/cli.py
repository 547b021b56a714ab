"""
Shared plumbing of the command line subcommands
"""

import argparse
import json
import os
import sys
from typing import Any, Callable, NoReturn

from .errors import RankDeficiencyError, SchemaError, UdsError, UsageError
from .logging import PrintLogger
from .types import Logger
from .utils import get_text, split_uri

PROG = 'udsmodellib'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Errors caused by the invocation or its inputs rather than by a computation
USAGE_ERRORS: tuple[type[UdsError], ...] = (SchemaError, UsageError, RankDeficiencyError)

class ArgumentParser(argparse.ArgumentParser):
    """
    argparse parser that raises UsageError instead of printing usage and exiting
    """

    def error(self, message: str) -> NoReturn:
        raise UsageError(f'{self.prog}: {message}')

def add_logging_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--verbose', '-v',
        help='Log debug messages',
        action='store_true'
    )
    parser.add_argument(
        '--quiet', '-q',
        help='Only log warnings and errors',
        action='store_true'
    )

def make_logger(args: argparse.Namespace) -> Logger:
    """
    Stderr logger honoring --verbose/--quiet
    """
    level = 'DEBUG' if args.verbose else 'WARNING' if args.quiet else 'INFO'
    return PrintLogger(min_level=level, stream=sys.stderr)

def diagnostic(err: BaseException) -> str:
    """
    Single line diagnostic of an error: error[<kind>] <location>: <message>
    """
    if isinstance(err, UdsError):
        text = err.diagnostic()
    elif isinstance(err, OSError):
        text = f'error[io] {err}'
    else:
        text = f'error[runtime] {type(err).__name__}: {err}'
    return f'{PROG}: ' + ' '.join(text.split())

def run_command(command: Callable[[], int], logger: Logger | None = None) -> int:
    """
    Run a subcommand body and map its failures to exit codes

    Usage, schema and rank errors exit with 2, any other failure with 1. Each failure prints one
    diagnostic line

    Args:
        command (Callable[[], int]): The subcommand body, returning its exit code
        logger (optional Logger | None default: None): Where diagnostics go, stderr if not present

    Returns:
        int: The exit code
    """
    logger = logger or PrintLogger(stream=sys.stderr)
    try:
        return command()
    except SystemExit as err:
        # --help
        return int(err.code or 0) if isinstance(err.code, int) or err.code is None else EXIT_USAGE
    except USAGE_ERRORS as err:
        logger.log(diagnostic(err), flush=True)
        return EXIT_USAGE
    except Exception as err: #pylint: disable=broad-exception-caught
        logger.log(diagnostic(err), flush=True)
        return EXIT_FAILURE

def parse_assignments(text: str) -> dict[str, float]:
    """
    Parse 'k=v,k=v' into a mapping of floats

    Raises:
        UsageError: On a malformed pair or a non-numeric value
    """
    values: dict[str, float] = {}
    for pair in filter(None, (part.strip() for part in text.split(','))):
        key, sep, val = pair.partition('=')
        if not sep or not key.strip():
            raise UsageError(f'Expected key=value, got "{pair}"')
        try:
            values[key.strip()] = float(val)
        except ValueError as err:
            raise UsageError(f'Value of "{key.strip()}" is not a number: "{val}"') from err
    return values

def load_json_arg(text: str, name: str) -> Any:
    """
    Parse an option that is either inline JSON or the location of a JSON document
    """
    stripped = text.strip()
    source = name
    if not stripped.startswith(('[', '{')):
        source = stripped
        stripped = get_text(stripped)
    try:
        return json.loads(stripped)
    except json.JSONDecodeError as err:
        raise SchemaError(err.msg, source=source, line=err.lineno, column=err.colno) from err

def stem(path: str) -> str:
    """
    File name of a path or URI without directory and extension
    """
    uri = split_uri(path)[1]
    return os.path.splitext(os.path.basename(uri.rstrip('/')))[0] or uri
