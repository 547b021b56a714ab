"""
Flow-setpoint conversion subcommand
"""

from dataclasses import asdict
import json
import sys

from .actuation import FAMILIES, Context, EmptyContext, FillContext, flow_at_opening, select_setpoint
from .config.app import load_config
from .util.cli import PROG, ArgumentParser, add_logging_args, make_logger, parse_assignments, run_command
from .util.errors import UsageError
from .util.logging import PrintLogger
from .util.types import Logger

# Context inputs per family, missing inputs default to 0
CONTEXT_INPUTS: dict[str, tuple[str, ...]] = {
    'fill': ('q_in5',),
    'empty': ('d_abro', 'g_out_a', 'q_in4'),
}

def build_context(family: str, inputs: dict[str, float]) -> Context:
    """
    Conversion context of a family from named inputs

    Raises:
        UsageError: On an input the family does not take
    """
    names = CONTEXT_INPUTS[family]
    unknown = [key for key in inputs if key not in names]
    if unknown:
        raise UsageError(f'{family} conversion takes {", ".join(names)}, got {", ".join(unknown)}')
    values = [inputs.get(name, 0.0) for name in names]
    return FillContext(*values) if family == 'fill' else EmptyContext(*values)

def main(args: list[str], logger: Logger | None = None) -> int:
    """
    Print the flow of an actuator opening or select the opening of a target flow
    """
    parser = ArgumentParser(prog=f'{PROG} convert', description='Evaluate a flow-setpoint conversion')
    parser.add_argument(
        '--family', '-F',
        help='The actuator family',
        choices=FAMILIES,
        required=True
    )
    parser.add_argument(
        '--opening', '-p',
        help='Opening (%%) to convert, a grid opening unless --interpolate',
        type=float
    )
    parser.add_argument(
        '--inputs', '-i',
        help='Context inputs as k=v,... (fill: q_in5; empty: d_abro, g_out_a, q_in4)',
        type=str,
        default=''
    )
    parser.add_argument(
        '--interpolate',
        help='Accept openings between grid points',
        action='store_true'
    )
    parser.add_argument(
        '--select',
        help='Select the opening of --target instead',
        action='store_true'
    )
    parser.add_argument(
        '--target',
        help='Target flow (m3/s) for --select',
        type=float
    )
    parser.add_argument(
        '--config', '-c',
        help='JSON config path/URI providing the actuation tables',
        type=str
    )
    add_logging_args(parser)

    def command() -> int:
        opts = parser.parse_args(args)
        log = logger or make_logger(opts)
        tables = load_config(opts.config, log).actuation
        context = build_context(opts.family, parse_assignments(opts.inputs))
        out = PrintLogger(stream=sys.stdout)
        if opts.select:
            if opts.target is None:
                raise UsageError('--select needs --target')
            decision = select_setpoint(opts.target, opts.family, context, tables)
            out.log(json.dumps(asdict(decision), sort_keys=True))
            return 0
        if opts.opening is None:
            raise UsageError('--opening is required unless --select is given')
        if not opts.interpolate and tables.grid.index_of(opts.opening) is None:
            raise UsageError(
                f'Opening {opts.opening:g} is not on the setpoint grid '
                f'{[f"{val:g}" for val in tables.grid.openings]}, use --interpolate'
            )
        flow = flow_at_opening(opts.family, opts.opening, context, tables, realizable=False)
        out.log(f'{flow:.10g}')
        return 0

    return run_command(command, logger)

if __name__ == '__main__':
    sys.exit(main(sys.argv[1:]))
