"""
Entry point for all udsmodellib commands
"""

import sys

#pylint: disable=import-error
from . import VERSION
from .compare import main as compare
from .config.app import table_checksum
from .convert import main as convert
from .fit import main as fit
from .simulate import main as simulate
from .util.cli import EXIT_USAGE, PROG, diagnostic
from .util.errors import UsageError
from .util.logging import PrintLogger
from .util.types import Logger

COMMANDS = {
    'simulate': simulate,
    'fit': fit,
    'convert': convert,
    'compare': compare,
}

def version() -> str:
    """
    Package version and the checksum of the embedded model and conversion tables
    """
    return f'{PROG} {VERSION} (tables {table_checksum()[:16]})'

def run(argv: list[str], logger: Logger | None = None) -> int:
    """
    Dispatch a command line to its subcommand

    Returns:
        int: The exit code
    """
    if argv and argv[0] == '--version':
        PrintLogger(stream=sys.stdout).log(version())
        return 0
    if not argv or argv[0] not in COMMANDS:
        mode = argv[0] if argv else ''
        err = UsageError(f'Invalid mode: "{mode}" expected: "{" | ".join(COMMANDS)}" or --version')
        (logger or PrintLogger(stream=sys.stderr)).log(diagnostic(err))
        return EXIT_USAGE
    mode, *args = argv
    return COMMANDS[mode](args, logger)

def main() -> None:
    """
    Entry point for all udsmodellib commands
    """
    sys.exit(run(sys.argv[1:]))

if __name__ == '__main__':
    main()
