"""
Linear and non-linear least squares fitting with goodness-of-fit metrics
"""

from dataclasses import dataclass, field
import math
from typing import Any, NamedTuple, Sequence

import numpy as np

from ..util.errors import FitInitializationError, RankDeficiencyError, UsageError
from ..util.types import Logger, log_fn
from .templates import Dataset, ExpressionTemplate

__all__ = [
    'RANK_RTOL',
    'Metrics',
    'metrics',
    'FitResult',
    'evaluate_fit',
    'fit_lls',
    'fit_nlls',
]

# Singular values below this fraction of the largest one count as zero
RANK_RTOL = 1e-10

class Metrics(NamedTuple):
    """
    Goodness-of-fit metrics, r2 is None when the targets have zero variance
    """
    rmse: float
    mae: float
    r2: float | None

def metrics(y_true: Sequence[float] | np.ndarray, y_pred: Sequence[float] | np.ndarray) -> Metrics:
    """
    Compute RMSE, MAE and R2 of predictions

    Args:
        y_true (Sequence[float] | np.ndarray): Observed values
        y_pred (Sequence[float] | np.ndarray): Predicted values

    Returns:
        Metrics: (rmse, mae, r2) with r2 None if all y_true are identical

    Raises:
        UsageError: If the lengths differ or are zero
    """
    y_true = np.asarray(y_true, dtype=float).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=float).reshape(-1)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise UsageError(f'metrics needs equal nonzero lengths, got {y_true.size} and {y_pred.size}')
    err = y_true - y_pred
    sse = float(err @ err)
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    rmse = math.sqrt(sse / y_true.size)
    mae = float(np.mean(np.abs(err)))
    return Metrics(rmse, mae, (1.0 - sse / sst) if sst > 0.0 else None)

@dataclass(frozen=True)
class FitResult: #pylint: disable=too-many-instance-attributes
    """
    Fitted parameters and their diagnostics

    Args:
        template (str): Name of the fitted template
        param_names (tuple[str, ...]): Parameter names
        params (tuple[float, ...]): Fitted parameter values
        rmse (float): Root mean squared error
        mae (float): Mean absolute error
        r2 (float | None): Coefficient of determination, None if undefined
        iterations (int): Accepted iterations, 0 for a closed form fit
        converged (bool): Whether the stopping rule was met before the iteration limit
        sse (float): Final sum of squared errors
        n_samples (int): Number of samples
        y_mean (float): Mean of the target
        y_sd (float): Standard deviation of the target
        y_max (float): Maximum of the target
        sse_trace (tuple[float, ...]): SSE of the initial and every accepted iterate
    """
    template: str
    param_names: tuple[str, ...]
    params: tuple[float, ...]
    rmse: float
    mae: float
    r2: float | None
    iterations: int
    converged: bool
    sse: float
    n_samples: int
    y_mean: float
    y_sd: float
    y_max: float
    sse_trace: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        # Power mean inequality up to rounding
        assert self.rmse >= self.mae * (1.0 - 1e-12) >= 0.0, (self.rmse, self.mae)

    def named_params(self) -> dict[str, float]:
        return dict(zip(self.param_names, self.params))

    def to_dict(self) -> dict[str, Any]:
        """
        JSON ready mapping with camelCase keys
        """
        return {
            'template': self.template,
            'params': list(self.params),
            'paramNames': list(self.param_names),
            'rmse': self.rmse,
            'mae': self.mae,
            'r2': self.r2,
            'iterations': self.iterations,
            'converged': self.converged,
            'sse': self.sse,
            'samples': self.n_samples,
            'targetMean': self.y_mean,
            'targetSd': self.y_sd,
            'targetMax': self.y_max,
        }

def _result(
    dataset: Dataset,
    template: ExpressionTemplate,
    params: np.ndarray,
    iterations: int,
    converged: bool,
    sse_trace: Sequence[float] = ()
) -> FitResult:
    pred = template.evaluate(params, dataset.inputs)
    rmse, mae, r2 = metrics(dataset.targets, pred)
    err = dataset.targets - pred
    return FitResult(
        template=template.name,
        param_names=tuple(template.param_names(dataset.features)),
        params=tuple(float(p) for p in params),
        rmse=rmse,
        mae=mae,
        r2=r2,
        iterations=iterations,
        converged=converged,
        sse=float(err @ err),
        n_samples=len(dataset),
        y_mean=float(dataset.targets.mean()),
        y_sd=float(dataset.targets.std()),
        y_max=float(dataset.targets.max()),
        sse_trace=tuple(sse_trace)
    )

def evaluate_fit(dataset: Dataset, template: ExpressionTemplate, params: Sequence[float]) -> FitResult:
    """
    Score given parameters on a dataset, e.g. a held-out test set
    """
    template.check(len(dataset.features))
    return _result(dataset, template, np.asarray(params, dtype=float), 0, True)

def fit_lls(
    dataset: Dataset,
    template: ExpressionTemplate,
    logger: Logger | None = None
) -> FitResult:
    """
    Closed form least squares fit of a template linear in its parameters

    Args:
        dataset (Dataset): The samples
        template (ExpressionTemplate): A template with linear == True
        logger (optional Logger | None default: None): Receives the singular values at debug level

    Returns:
        FitResult: The minimizer of the sum of squared errors

    Raises:
        UsageError: If the template is not linear in its parameters
        RankDeficiencyError: If the design matrix is rank deficient, naming the collinear columns
    """
    log = log_fn(logger)
    template.check(len(dataset.features))
    if not template.linear:
        raise UsageError(f'Template "{template.name}" is not linear in its parameters, use fit_nlls')
    names = template.param_names(dataset.features)
    design = template.design(dataset.inputs)
    n_params = design.shape[1]
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    log(f'Design singular values: {s.tolist()}', level=Logger.DEBUG)
    tol = RANK_RTOL * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if rank < n_params:
        if vt.shape[0] < n_params:
            vt = np.linalg.svd(design, full_matrices=True)[2]
        null = vt[rank:]
        involved = np.any(np.abs(null) > 1e-8 * np.max(np.abs(null), axis=1, keepdims=True), axis=0)
        raise RankDeficiencyError([name for name, hit in zip(names, involved) if hit])
    params = vt.T @ ((u.T @ dataset.targets) / s)
    log(f'LLS fit of "{template.name}" on {len(dataset)} samples', level=Logger.INFO)
    return _result(dataset, template, params, 0, True)

def _fd_jacobian(template: ExpressionTemplate, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    jac = np.empty((inputs.shape[0], params.size))
    for j in range(params.size):
        step = 1e-6 * max(1.0, abs(params[j]))
        hi = params.copy()
        lo = params.copy()
        hi[j] += step
        lo[j] -= step
        jac[:, j] = (template.evaluate(hi, inputs) - template.evaluate(lo, inputs)) / (2.0 * step)
    return jac

def _jacobian(template: ExpressionTemplate, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    jac = template.jacobian(params, inputs)
    return jac if jac is not None else _fd_jacobian(template, params, inputs)

def fit_nlls( #pylint: disable=too-many-locals
    dataset: Dataset,
    template: ExpressionTemplate,
    initial_params: Sequence[float],
    tol: float = 1e-10,
    max_iter: int = 200,
    logger: Logger | None = None
) -> FitResult:
    """
    Levenberg-Marquardt damped Gauss-Newton fit

    The damping starts at 1e-3 and is multiplied by 10 on every rejected step and divided by 10
    on every accepted one. Accepted steps never increase the sum of squared errors

    Args:
        dataset (Dataset): The samples
        template (ExpressionTemplate): Any differentiable template
        initial_params (Sequence[float]): Starting parameters, one per template parameter
        tol (optional float default: 1e-10): Relative SSE change below which the fit has converged
        max_iter (optional int default: 200): Maximum number of iterations
        logger (optional Logger | None default: None): Receives per-iteration progress at debug
        level

    Returns:
        FitResult: Fitted parameters, converged False if max_iter was reached first

    Raises:
        UsageError: If the number of initial parameters does not match the template
        FitInitializationError: If the residual or Jacobian is non-finite at initial_params
    """
    log = log_fn(logger)
    template.check(len(dataset.features))
    params = np.asarray(initial_params, dtype=float).reshape(-1)
    arity = template.arity(dataset.features)
    if params.size != arity:
        raise UsageError(f'Template "{template.name}" takes {arity} parameters, got {params.size}')
    y = dataset.targets
    res = y - template.evaluate(params, dataset.inputs)
    jac = _jacobian(template, params, dataset.inputs)
    if not (np.all(np.isfinite(res)) and np.all(np.isfinite(jac))):
        raise FitInitializationError(
            f'Residual or Jacobian of "{template.name}" is non-finite at the initial parameters'
        )
    sse = float(res @ res)
    trace = [sse]
    damping = 1e-3
    iterations = 0
    converged = False
    for _ in range(max_iter):
        if sse == 0.0:
            converged = True
            break
        jtj = jac.T @ jac
        grad = jac.T @ res
        scale = np.diag(jtj) + np.finfo(float).eps
        accepted = False
        while damping <= 1e16:
            try:
                step = np.linalg.solve(jtj + damping * np.diag(scale), grad)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            candidate = params + step
            cand_res = y - template.evaluate(candidate, dataset.inputs)
            cand_sse = float(cand_res @ cand_res)
            if math.isfinite(cand_sse) and cand_sse <= sse:
                accepted = True
                break
            damping *= 10.0
        if not accepted:
            # No descent direction left at any damping
            converged = True
            break
        rel_change = (sse - cand_sse) / sse
        params, res, sse = candidate, cand_res, cand_sse
        trace.append(sse)
        iterations += 1
        damping = max(damping / 10.0, 1e-12)
        log(f'iter {iterations}: sse={sse:.6e} damping={damping:.1e}', level=Logger.DEBUG)
        if rel_change < tol:
            converged = True
            break
        jac = _jacobian(template, params, dataset.inputs)
        if not np.all(np.isfinite(jac)):
            break
    log(
        f'NLLS fit of "{template.name}": {iterations} iterations, sse={sse:.6e}, '
        f'converged={converged}',
        level=Logger.INFO if converged else Logger.WARNING
    )
    return _result(dataset, template, params, iterations, converged, trace)
