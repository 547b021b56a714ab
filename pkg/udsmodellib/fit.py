"""
Equation fitting subcommand
"""

import json
import sys
from typing import Any

from .datafit import Dataset, FitResult, evaluate_fit, fit_lls, fit_nlls, get_template
from .util.cli import (
    EXIT_FAILURE,
    PROG,
    ArgumentParser,
    add_logging_args,
    load_json_arg,
    make_logger,
    run_command
)
from .util.errors import UsageError
from .util.logging import PrintLogger
from .util.types import Logger
from .util.utils import get_text, save_text

SUMMARY_HEADER = 'template | target | samples | mean ± sd | max | RMSE | MAE | R2'

def summary_row(target: str, fit: FitResult) -> str:
    """
    One row of a goodness-of-fit table: descriptive statistics of the target and the metrics
    """
    r2 = f'{fit.r2:.2f}' if fit.r2 is not None else 'n/a'
    return (
        f'{fit.template} | {target} | {fit.n_samples} | {fit.y_mean:.2f} ± {fit.y_sd:.2f} | '
        f'{fit.y_max:.2f} | {fit.rmse:.3g} | {fit.mae:.3g} | {r2}'
    )

def _initial_params(init: Any, names: list[str]) -> list[float]:
    if isinstance(init, dict):
        missing = [name for name in names if name not in init]
        unknown = [key for key in init if key not in names]
        if missing or unknown:
            raise UsageError(
                f'--init must name exactly the parameters {names}, missing {missing}, unknown {unknown}'
            )
        init = [init[name] for name in names]
    if not isinstance(init, list) or not all(
        isinstance(val, (int, float)) and not isinstance(val, bool) for val in init
    ):
        raise UsageError('--init must be a JSON list of numbers or an object of named numbers')
    return [float(val) for val in init]

def main(args: list[str], logger: Logger | None = None) -> int:
    """
    Fit an expression template to a dataset and write the FitResult JSON
    """
    parser = ArgumentParser(prog=f'{PROG} fit', description='Fit a model equation to data')
    parser.add_argument(
        '--data', '-d',
        help='Dataset CSV path/URI with a header row',
        type=str,
        required=True
    )
    parser.add_argument(
        '--template', '-t',
        help='Expression template, e.g. linear, quadratic, polynomial:3, multivariate-quadratic, '
        'quad-plus-log, logistic',
        type=str,
        required=True
    )
    parser.add_argument(
        '--target', '-y',
        help='Target column',
        type=str,
        required=True
    )
    parser.add_argument(
        '--features', '-f',
        help='Comma separated feature columns, every other column if not present',
        type=str
    )
    parser.add_argument(
        '--init', '-i',
        help='Initial parameters for non-linear templates: inline JSON list/object or a JSON path',
        type=str
    )
    parser.add_argument(
        '--test-fraction',
        help='Trailing fraction of rows held out as test data',
        type=float,
        default=0.0
    )
    parser.add_argument(
        '--max-iter',
        help='Iteration limit of non-linear fits',
        type=int,
        default=200
    )
    parser.add_argument(
        '--tol',
        help='Relative SSE change at which non-linear fits stop',
        type=float,
        default=1e-10
    )
    parser.add_argument(
        '--out', '-o',
        help='Where to write the FitResult JSON',
        type=str,
        default='fit.json'
    )
    add_logging_args(parser)

    def command() -> int:
        opts = parser.parse_args(args)
        log = logger or make_logger(opts)
        template = get_template(opts.template)
        features = [name.strip() for name in opts.features.split(',')] if opts.features else None
        dataset = Dataset.from_csv(get_text(opts.data), opts.target, features, source=opts.data)
        calib, test = dataset.split(opts.test_fraction)
        if template.linear:
            if opts.init is not None:
                log.log(f'Ignoring --init, "{template.name}" is fitted in closed form', level=Logger.WARNING)
            fit = fit_lls(calib, template, log)
        else:
            if opts.init is None:
                raise UsageError(f'Template "{template.name}" needs initial parameters (--init)')
            init = _initial_params(
                load_json_arg(opts.init, '--init'), template.param_names(calib.features)
            )
            fit = fit_nlls(calib, template, init, opts.tol, opts.max_iter, log)
        doc: dict[str, Any] = {'target': opts.target, 'features': list(calib.features), **fit.to_dict()}
        out = PrintLogger(stream=sys.stdout)
        out.log(SUMMARY_HEADER)
        out.log(summary_row(opts.target, fit))
        if test is not None:
            test_fit = evaluate_fit(test, template, fit.params)
            doc['test'] = {
                'samples': test_fit.n_samples, 'rmse': test_fit.rmse, 'mae': test_fit.mae, 'r2': test_fit.r2
            }
            out.log(summary_row(f'{opts.target} (test)', test_fit))
        save_text(opts.out, json.dumps(doc, indent=2, sort_keys=True) + '\n', 'application/json')
        log.log(f'Wrote {opts.out}', level=Logger.INFO)
        if not fit.converged:
            log.log(
                f'{PROG}: error[fit] "{template.name}" did not converge in {opts.max_iter} iterations',
                flush=True
            )
            return EXIT_FAILURE
        return 0

    return run_command(command, logger)

if __name__ == '__main__':
    sys.exit(main(sys.argv[1:]))
