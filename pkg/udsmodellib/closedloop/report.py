"""
Run directory emission
"""

import json
from typing import Any

import pandas as pd

from ..util.types import Logger, log_fn
from ..util.utils import join_path, save_text
from .runner import TRACE_HEADER, Comparison, RunResult

__all__ = [
    'kpi_document',
    'write_run',
    'write_comparison',
]

def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator='\n')

def kpi_document(result: RunResult) -> dict[str, Any]:
    """
    Content of kpi.json: KPI volumes, mass balance, scenario metadata and, for MPC runs, the
    conversion R2 and optimizer totals
    """
    doc = result.kpi.to_dict()
    doc['metadata'] = result.scenario.metadata.to_dict()
    if result.mpc_results:
        doc['conversion'] = {
            'r2GOutA': result.conversion.r2_g_out_a,
            'r2GEmptA': result.conversion.r2_g_empt_a,
        }
        doc['optimizer'] = {
            'evaluations': sum(res.evaluations for res in result.mpc_results),
            'iterations': sum(res.iterations for res in result.mpc_results),
            'budgetExhaustedSteps': sum(1 for res in result.mpc_results if res.budget_exhausted),
        }
    return doc

def write_run(
    result: RunResult,
    directory: str,
    trace: list[str] | None = None,
    logger: Logger | None = None
) -> list[str]:
    """
    Write trajectories.csv, kpi.json, conversion.csv and, if trace lines are given, trace.csv

    Args:
        result (RunResult): The run
        directory (str): Run directory (local path or URI)
        trace (optional list[str] | None default: None): Optimizer trace lines
        logger (optional Logger | None default: None): Receives one line per written file

    Returns:
        list[str]: The written paths
    """
    files = {
        'trajectories.csv': (_csv(result.trajectories), 'text/csv'),
        'kpi.json': (json.dumps(kpi_document(result), indent=2, sort_keys=True) + '\n', 'application/json'),
        'conversion.csv': (_csv(result.conversion.frame), 'text/csv'),
    }
    if trace is not None:
        files['trace.csv'] = (TRACE_HEADER + '\n' + ''.join(trace), 'text/csv')
    written = []
    for name, (text, content_type) in files.items():
        path = join_path(directory, name)
        save_text(path, text, content_type)
        log_fn(logger)(f'Wrote {path}', level=Logger.INFO)
        written.append(path)
    return written

def write_comparison(
    comparison: Comparison,
    directory: str,
    trace: list[str] | None = None,
    logger: Logger | None = None
) -> list[str]:
    """
    Write comparison.md plus one run directory per side, named after its controller or, when both
    sides run the same controller, baseline-<name> and candidate-<name>
    """
    written = []
    same = comparison.baseline.controller == comparison.candidate.controller
    for side, result in (('baseline', comparison.baseline), ('candidate', comparison.candidate)):
        run_trace = trace if result.controller == 'mpc' else None
        name = f'{side}-{result.controller}' if same else result.controller
        written += write_run(result, join_path(directory, name), run_trace, logger)
    path = join_path(directory, 'comparison.md')
    save_text(path, comparison.markdown(), 'text/markdown')
    log_fn(logger)(f'Wrote {path}', level=Logger.INFO)
    return [*written, path]
