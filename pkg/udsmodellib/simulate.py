"""
Closed-loop simulation subcommand
"""

import argparse
from dataclasses import replace
import sys

from .closedloop import CONTROLLERS, RunResult, load_scenario, run_closed_loop, write_run
from .config.app import AppConfig, load_config
from .util.cli import PROG, ArgumentParser, add_logging_args, make_logger, run_command, stem
from .util.errors import UsageError
from .util.logging import BufferedLogger, PrintLogger
from .util.types import Logger
from .util.utils import join_path

def add_run_args(parser: argparse.ArgumentParser) -> None:
    """
    Options shared by simulate and compare
    """
    parser.add_argument(
        '--scenario', '-s',
        help='Scenario CSV path/URI or builtin://<name>',
        type=str,
        required=True
    )
    parser.add_argument(
        '--config', '-c',
        help='JSON config path/URI, embedded defaults if not present',
        type=str
    )
    parser.add_argument(
        '--out', '-o',
        help='Run directory, <output.directory>/<scenario>-<controller> if not present',
        type=str
    )
    parser.add_argument(
        '--trace',
        help='Write the MPC optimizer cost trace to trace.csv',
        action='store_true'
    )
    parser.add_argument(
        '--perturbation',
        help='Overrides plant.perturbation',
        type=float
    )
    parser.add_argument(
        '--seed',
        help='Overrides plant.seed',
        type=int
    )
    add_logging_args(parser)

def resolve_config(args: argparse.Namespace, logger: Logger) -> AppConfig:
    """
    Load the config and apply the plant overrides given on the command line
    """
    config = load_config(args.config, logger)
    overrides = {
        name: getattr(args, name) for name in ('perturbation', 'seed') if getattr(args, name) is not None
    }
    if overrides:
        try:
            config = replace(config, plant=replace(config.plant, **overrides))
        except ValueError as err:
            raise UsageError(str(err)) from err
    return config

def print_kpis(result: RunResult, out: Logger) -> None:
    kpi = result.kpi
    out.log(f'{result.controller} on {result.scenario.name} ({kpi.steps} steps of {kpi.dt:g} s), 10^3 m3:')
    for label, value in (
        ('Q_CSO4', kpi.q_cso4),
        ('Q_CSO5', kpi.q_cso5),
        ('Q_CSOSur', kpi.q_cso_sur),
        ('Total CSO', kpi.total_cso),
        ('Q_WWTPSur', kpi.q_wwtp_sur),
        ('Q_LaGavia', kpi.q_la_gavia),
    ):
        out.log(f'  {label:<10} {value:10.3f}')
    if result.mpc_results:
        r2_out, r2_empt = result.conversion.r2_g_out_a, result.conversion.r2_g_empt_a
        out.log(f'  conversion R2: G_outA={r2_out}, G_emptA={r2_empt}')

def main(args: list[str], logger: Logger | None = None) -> int:
    """
    Run one controller against the plant over a scenario and write the run directory
    """
    parser = ArgumentParser(prog=f'{PROG} simulate', description='Run a closed-loop simulation')
    add_run_args(parser)
    parser.add_argument(
        '--controller', '-C',
        help='The controller to simulate',
        choices=CONTROLLERS,
        default='mpc'
    )

    def command() -> int:
        opts = parser.parse_args(args)
        log = logger or make_logger(opts)
        config = resolve_config(opts, log)
        scenario = load_scenario(opts.scenario, log)
        trace = BufferedLogger() if opts.trace else None
        result = run_closed_loop(scenario, opts.controller, config, log, trace)
        directory = opts.out or join_path(
            config.output.directory, f'{stem(opts.scenario)}-{opts.controller}'
        )
        if trace is not None:
            trace.flush()
        write_run(result, directory, trace.lines if trace is not None else None, log)
        print_kpis(result, PrintLogger(stream=sys.stdout))
        return 0

    return run_command(command, logger)

if __name__ == '__main__':
    sys.exit(main(sys.argv[1:]))
