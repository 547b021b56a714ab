"""
Controller comparison subcommand
"""

import sys

from .closedloop import CONTROLLERS, compare_controllers, load_scenario, write_comparison
from .simulate import add_run_args, resolve_config
from .util.cli import PROG, ArgumentParser, make_logger, run_command, stem
from .util.logging import BufferedLogger, PrintLogger
from .util.types import Logger
from .util.utils import join_path

def main(args: list[str], logger: Logger | None = None) -> int:
    """
    Run a baseline and a candidate controller on a scenario and write comparison.md
    """
    parser = ArgumentParser(prog=f'{PROG} compare', description='Compare two controllers')
    add_run_args(parser)
    parser.add_argument(
        '--baseline',
        help='Reference controller',
        choices=CONTROLLERS,
        default='rbc'
    )
    parser.add_argument(
        '--candidate',
        help='Compared controller',
        choices=CONTROLLERS,
        default='mpc'
    )

    def command() -> int:
        opts = parser.parse_args(args)
        log = logger or make_logger(opts)
        config = resolve_config(opts, log)
        scenario = load_scenario(opts.scenario, log)
        trace = BufferedLogger() if opts.trace else None
        comparison = compare_controllers(
            scenario, config, opts.baseline, opts.candidate, log, trace
        )
        directory = opts.out or join_path(config.output.directory, f'{stem(opts.scenario)}-compare')
        if trace is not None:
            trace.flush()
        write_comparison(comparison, directory, trace.lines if trace is not None else None, log)
        PrintLogger(stream=sys.stdout).log(comparison.markdown(), end='')
        return 0

    return run_command(command, logger)

if __name__ == '__main__':
    sys.exit(main(sys.argv[1:]))
