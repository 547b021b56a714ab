"""
Receding horizon model predictive control of the Abronigales tank actuators

The optimal control problem is solved by direct single shooting over the LM model: the decision
vector holds the bypass and emptying flows of every horizon step
"""

from dataclasses import dataclass, field
import math
from typing import Any, Callable, Literal, Sequence

import numpy as np

from ..actuation import (
    DEFAULT_TABLES,
    ActuationTables,
    EmptyContext,
    FillContext,
    SetpointDecision,
    grid_values,
    select_setpoint
)
from ..config.utils import ConfigSource, FieldTable, dump_section, require_number_list, validate_section
from ..lm import (
    DEFAULT_PARAMS,
    LmControls,
    LmInputs,
    LmOutputs,
    LmParams,
    LmState,
    clamp_controls,
    level_from_volume,
    lm_step
)
from ..util.errors import UsageError
from ..util.types import Logger, log_fn

__all__ = [
    'Forecast',
    'OCP_FIELDS',
    'OcpConfig',
    'ControlPlan',
    'CostBreakdown',
    'MpcResult',
    'ActuatorReach',
    'ControllerStep',
    'stage_cost',
    'evaluate_cost',
    'solve_mpc',
    'fit_window',
    'receding_horizon_controller',
]

Forecast = Literal['perfect', 'persistence']

OCP_FIELDS: FieldTable = {
    'dt': ('dt', ('number',), 300.0),
    'horizon': ('horizon', ('number',), 12),
    'w_cso': ('wCso', ('number',), 1.0),
    'w_wwtp': ('wWwtp', ('number',), 0.1),
    'w_smooth': ('wSmooth', ('number',), 0.01),
    'g_out_bounds': ('gOutABounds', ('array',), [0.0, 25.0]),
    'g_empt_bounds': ('gEmptABounds', ('array',), [0.0, 5.0]),
    'max_evaluations': ('maxEvaluations', ('number',), 2000),
    'tolerance': ('tolerance', ('number',), 1e-9),
    'fd_step': ('fdStep', ('number',), 1e-4),
    'forecast': ('forecast', ('string',), 'perfect'),
}

@dataclass(frozen=True, slots=True)
class OcpConfig: #pylint: disable=too-many-instance-attributes
    """
    Optimal control problem settings

    Args:
        dt (optional float default: 300.0): Sampling interval (s)
        horizon (optional int default: 12): Prediction horizon (steps)
        w_cso (optional float default: 1.0): Weight of the CSO volume term
        w_wwtp (optional float default: 0.1): Weight of the WWTP capacity shortfall term
        w_smooth (optional float default: 0.01): Weight of the control variation term
        g_out_bounds (optional tuple[float, float] default: (0.0, 25.0)): Bypass flow box (m3/s)
        g_empt_bounds (optional tuple[float, float] default: (0.0, 5.0)): Emptying flow box (m3/s)
        max_evaluations (optional int default: 2000): Cost evaluation budget per solve
        tolerance (optional float default: 1e-9): Relative cost decrease below which a descent
        step counts as stalled
        fd_step (optional float default: 1e-4): Finite difference step (m3/s)
        forecast (optional Forecast default: 'perfect'): Disturbance forecast used by the
        closed-loop runner
    """
    dt: float = 300.0
    horizon: int = 12
    w_cso: float = 1.0
    w_wwtp: float = 0.1
    w_smooth: float = 0.01
    g_out_bounds: tuple[float, float] = (0.0, 25.0)
    g_empt_bounds: tuple[float, float] = (0.0, 5.0)
    max_evaluations: int = 2000
    tolerance: float = 1e-9
    fd_step: float = 1e-4
    forecast: Forecast = 'perfect'

    def __post_init__(self) -> None:
        if self.horizon < 1 or int(self.horizon) != self.horizon:
            raise ValueError(f'horizon must be an integer >= 1, got {self.horizon!r}')
        if not math.isfinite(self.dt) or self.dt <= 0.0:
            raise ValueError(f'dt must be > 0, got {self.dt!r}')
        for name in ('w_cso', 'w_wwtp', 'w_smooth'):
            if not math.isfinite(getattr(self, name)) or getattr(self, name) < 0.0:
                raise ValueError(f'{name} must be >= 0, got {getattr(self, name)!r}')
        for name in ('g_out_bounds', 'g_empt_bounds'):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi or not math.isfinite(hi):
                raise ValueError(f'{name} must satisfy 0 <= min <= max, got {(lo, hi)!r}')
        if self.max_evaluations < 1:
            raise ValueError(f'max_evaluations must be >= 1, got {self.max_evaluations!r}')
        if self.tolerance < 0.0 or self.fd_step <= 0.0:
            raise ValueError('tolerance must be >= 0 and fd_step > 0')
        if self.forecast not in ('perfect', 'persistence'):
            raise ValueError(f'forecast must be "perfect" or "persistence", got {self.forecast!r}')

    @property
    def lower(self) -> np.ndarray:
        return np.tile([self.g_out_bounds[0], self.g_empt_bounds[0]], self.horizon)

    @property
    def upper(self) -> np.ndarray:
        return np.tile([self.g_out_bounds[1], self.g_empt_bounds[1]], self.horizon)

    @classmethod
    def from_dict(cls, doc: Any, source: ConfigSource | None = None) -> 'OcpConfig':
        source = source or ConfigSource('<ocp>')
        values = validate_section(doc, OCP_FIELDS, 'ocp', source)
        for name in ('g_out_bounds', 'g_empt_bounds'):
            values[name] = tuple(
                require_number_list(values[name], f'ocp.{OCP_FIELDS[name][0]}', source, 2)
            )
        for name in ('horizon', 'max_evaluations'):
            if int(values[name]) != values[name]:
                raise source.error(f'"ocp.{OCP_FIELDS[name][0]}" must be an integer', OCP_FIELDS[name][0])
            values[name] = int(values[name])
        try:
            return cls(**values)
        except ValueError as err:
            raise source.error(str(err), key='ocp') from err

    def to_dict(self) -> dict[str, Any]:
        values = {name: getattr(self, name) for name in OCP_FIELDS}
        values['g_out_bounds'] = list(self.g_out_bounds)
        values['g_empt_bounds'] = list(self.g_empt_bounds)
        return dump_section(values, OCP_FIELDS)

@dataclass(frozen=True, slots=True)
class ControlPlan:
    """
    Actuator flow targets for every horizon step
    """
    steps: tuple[LmControls, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def to_vector(self) -> np.ndarray:
        return np.array([val for u in self.steps for val in (u.g_out_a, u.g_empt_a)], dtype=float)

    @classmethod
    def from_vector(cls, vec: np.ndarray | Sequence[float]) -> 'ControlPlan':
        vec = np.asarray(vec, dtype=float)
        return cls(tuple(LmControls(float(vec[i]), float(vec[i + 1])) for i in range(0, vec.size, 2)))

    @classmethod
    def constant(cls, controls: LmControls, horizon: int) -> 'ControlPlan':
        return cls((controls,) * horizon)

    def shifted(self) -> 'ControlPlan':
        """
        Drop the first step and repeat the last one
        """
        return ControlPlan(self.steps[1:] + self.steps[-1:])

    def within(self, config: OcpConfig) -> bool:
        vec = self.to_vector()
        return len(self) == config.horizon and bool(
            np.all(vec >= config.lower) and np.all(vec <= config.upper)
        )

@dataclass(frozen=True, slots=True)
class CostBreakdown:
    """
    Weighted cost and its sub-objectives

    j_cso is the CSO volume (m3), j_wwtp the WWTP capacity shortfall volume (m3) and j_smooth the
    sum of squared control variations ((m3/s)^2)
    """
    j_total: float
    j_cso: float
    j_wwtp: float
    j_smooth: float

@dataclass(frozen=True)
class MpcResult:
    """
    Outcome of one solve_mpc call

    Args:
        plan (ControlPlan): Optimized plan, as realized by the model
        cost (CostBreakdown): Cost of the plan
        warm_cost (CostBreakdown): Cost of the (box clamped) warm start
        evaluations (int): Number of cost evaluations
        iterations (int): Number of accepted descent steps
        budget_exhausted (bool): Whether the evaluation budget ran out before convergence
        cost_trace (tuple[float, ...]): Total cost after every accepted step
    """
    plan: ControlPlan
    cost: CostBreakdown
    warm_cost: CostBreakdown
    evaluations: int
    iterations: int
    budget_exhausted: bool
    cost_trace: tuple[float, ...] = field(default=())
    predicted: tuple[LmOutputs, ...] = field(default=())

def stage_cost(
    outputs: LmOutputs,
    u_prev: LmControls,
    config: OcpConfig,
    params: LmParams = DEFAULT_PARAMS
) -> tuple[float, float, float]:
    """
    Unweighted (cso, wwtp, smooth) contributions of one simulated step
    """
    j_cso = config.dt * (outputs.q_cso4 + outputs.q_cso5 + outputs.q_cso_sur)
    j_wwtp = config.dt * (
        (params.sur_cap - outputs.q_wwtp_sur) + (params.la_gavia_cap - outputs.q_la_gavia)
    )
    j_smooth = (outputs.g_out_a - u_prev.g_out_a) ** 2 + (outputs.g_empt_a - u_prev.g_empt_a) ** 2
    return j_cso, j_wwtp, j_smooth

class ActuatorReach:
    """
    Largest flows the actuators can deliver at each step of a forecast

    The bypass reach is the largest fill conversion value at the forecast arriving flow. The
    emptying reach is the largest empty conversion value at the tank level, the bypass flow and the
    forecast inlet 4 flow of the step

    Args:
        forecast (Sequence[LmInputs]): Disturbances over the horizon
        tables (ActuationTables): Conversion tables
        params (LmParams): Model parameters
    """

    def __init__(
        self,
        forecast: Sequence[LmInputs],
        tables: ActuationTables,
        params: LmParams
    ) -> None:
        self.params = params
        self.fill = [
            max(grid_values('fill', FillContext(inputs.q_in5), tables)) for inputs in forecast
        ]
        # (f, g, h, r*q_in4 + s) of every opening per forecast step
        self.empty = [
            [(row.f, row.g, row.h, row.r * inputs.q_in4 + row.s) for row in tables.empty.rows]
            for inputs in forecast
        ]

    def limit(
        self,
        j: int,
        state: LmState,
        inputs: LmInputs,
        controls: LmControls,
        dt: float
    ) -> LmControls:
        """
        Cap the controls of forecast step j at the actuator reach, bypass first
        """
        g_out = min(controls.g_out_a, self.fill[j])
        # the model may still raise the bypass to the tank inlet minimum
        g_out = clamp_controls(state, inputs, LmControls(g_out, 0.0), dt, self.params).g_out_a
        d = level_from_volume(max(state.v_abro, 0.0), self.params)
        reach = max(f * d ** 2 + g * d + h * g_out + rest for f, g, h, rest in self.empty[j])
        return LmControls(g_out, min(controls.g_empt_a, max(reach, 0.0)))

def _rollout(
    plan: ControlPlan,
    state: LmState,
    forecast: Sequence[LmInputs],
    config: OcpConfig,
    params: LmParams,
    reach: ActuatorReach | None = None
) -> tuple[CostBreakdown, list[LmOutputs]]:
    if len(forecast) != config.horizon or len(plan) != config.horizon:
        raise UsageError(
            f'Forecast ({len(forecast)}) and plan ({len(plan)}) lengths must equal the horizon '
            f'({config.horizon})'
        )
    j_cso = j_wwtp = j_smooth = 0.0
    outputs: list[LmOutputs] = []
    for j, (inputs, controls) in enumerate(zip(forecast, plan.steps)):
        u_prev = state.u_prev
        if reach is not None:
            controls = reach.limit(j, state, inputs, controls, config.dt)
        state, out = lm_step(state, inputs, controls, config.dt, params)
        cso, wwtp, smooth = stage_cost(out, u_prev, config, params)
        j_cso += cso
        j_wwtp += wwtp
        j_smooth += smooth
        outputs.append(out)
    total = config.w_cso * j_cso + config.w_wwtp * j_wwtp + config.w_smooth * j_smooth
    return CostBreakdown(total, j_cso, j_wwtp, j_smooth), outputs

def evaluate_cost(
    plan: ControlPlan,
    state: LmState,
    forecast: Sequence[LmInputs],
    config: OcpConfig,
    params: LmParams = DEFAULT_PARAMS,
    tables: ActuationTables | None = None
) -> CostBreakdown:
    """
    Cost of applying a plan from a state under a disturbance forecast

    Controls are clamped to feasibility by the model and the smoothing term uses the realized
    flows, starting from state.u_prev. With tables the controls are first capped at what the
    actuators can deliver (see ActuatorReach)

    Raises:
        UsageError: If the forecast or plan length differs from the horizon
    """
    reach = ActuatorReach(forecast, tables, params) if tables is not None else None
    return _rollout(plan, state, forecast, config, params, reach)[0]

class _BudgetExhausted(Exception):
    pass

class _Objective:
    def __init__(
        self,
        state: LmState,
        forecast: Sequence[LmInputs],
        config: OcpConfig,
        params: LmParams,
        reach: ActuatorReach | None
    ) -> None:
        self.state = state
        self.forecast = forecast
        self.config = config
        self.params = params
        self.reach = reach
        self.evaluations = 0

    def __call__(self, vec: np.ndarray) -> float:
        if self.evaluations >= self.config.max_evaluations:
            raise _BudgetExhausted()
        self.evaluations += 1
        plan = ControlPlan.from_vector(vec)
        cost, _ = _rollout(plan, self.state, self.forecast, self.config, self.params, self.reach)
        return cost.j_total

def _gradient(
    fun: Callable[[np.ndarray], float],
    x: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    step: float
) -> np.ndarray:
    grad = np.zeros(x.size)
    for j in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[j] = min(x[j] + step, upper[j])
        lo[j] = max(x[j] - step, lower[j])
        if hi[j] > lo[j]:
            grad[j] = (fun(hi) - fun(lo)) / (hi[j] - lo[j])
    return grad

def solve_mpc( #pylint: disable=too-many-locals,too-many-branches,too-many-statements
    state: LmState,
    forecast: Sequence[LmInputs],
    warm_start: ControlPlan,
    config: OcpConfig,
    params: LmParams = DEFAULT_PARAMS,
    logger: Logger | None = None,
    tables: ActuationTables | None = None
) -> MpcResult:
    """
    Minimize the plan cost within the control box bounds

    Projected finite difference gradient descent with a backtracking step, started from the best
    of the warm start, the zero plan and a lattice of constant plans. When a gradient step stalls
    every coordinate is line searched in turn. The result never costs more than the warm start and
    is returned as the model realized it, so with tables every step is within actuator reach

    Args:
        state (LmState): Current model state
        forecast (Sequence[LmInputs]): Disturbances over the horizon
        warm_start (ControlPlan): Initial guess, clamped to the box if outside it
        config (OcpConfig): Problem settings
        params (optional LmParams default: DEFAULT_PARAMS): Model parameters
        logger (optional Logger | None default: None): Receives progress at debug level and a
        warning when the budget is exhausted
        tables (optional ActuationTables | None default: None): Conversion tables capping the
        planned flows at what the actuators can deliver, uncapped if None

    Returns:
        MpcResult: The best plan found and its diagnostics
    """
    log = log_fn(logger)
    lower, upper = config.lower, config.upper
    if len(warm_start) != config.horizon:
        raise UsageError(f'Warm start length {len(warm_start)} != horizon {config.horizon}')
    reach = ActuatorReach(forecast, tables, params) if tables is not None else None
    objective = _Objective(state, forecast, config, params, reach)
    warm = np.clip(warm_start.to_vector(), lower, upper)
    warm_cost = _rollout(ControlPlan.from_vector(warm), state, forecast, config, params, reach)[0]

    best_x, best_f = warm, warm_cost.j_total
    trace = [best_f]
    iterations = 0
    exhausted = False

    def consider(x: np.ndarray) -> bool:
        nonlocal best_x, best_f
        val = objective(x)
        if val < best_f:
            best_x, best_f = x, val
            return True
        return False

    try:
        consider(lower.copy())
        levels = [np.linspace(lo, hi, 5) for lo, hi in (config.g_out_bounds, config.g_empt_bounds)]
        for g_out in levels[0]:
            for g_empt in levels[1]:
                consider(np.tile([g_out, g_empt], config.horizon))
        trace.append(best_f)

        span = float(np.max(upper - lower)) if upper.size else 0.0
        step = max(span / 4.0, config.fd_step)
        min_step = config.fd_step
        while True:
            f_start = best_f
            grad = _gradient(objective, best_x, lower, upper, config.fd_step)
            # Zero the components pushing into an active bound
            grad[(best_x <= lower) & (grad > 0.0)] = 0.0
            grad[(best_x >= upper) & (grad < 0.0)] = 0.0
            norm = float(np.max(np.abs(grad))) if grad.size else 0.0
            if norm > 0.0:
                direction = -grad / norm
                while step >= min_step:
                    if consider(np.clip(best_x + step * direction, lower, upper)):
                        step *= 2.0
                        break
                    step /= 2.0
            if f_start - best_f <= config.tolerance * max(1.0, abs(f_start)):
                # Coordinate sweep
                for j in range(best_x.size):
                    coord_step = max(span / 4.0, min_step)
                    while coord_step >= min_step:
                        improved = False
                        for sign in (1.0, -1.0):
                            x = best_x.copy()
                            x[j] = min(max(x[j] + sign * coord_step, lower[j]), upper[j])
                            if x[j] != best_x[j] and consider(x):
                                improved = True
                                break
                        if not improved:
                            coord_step /= 4.0
                step = max(step, span / 4.0, min_step)
                if f_start - best_f <= config.tolerance * max(1.0, abs(f_start)):
                    trace.append(best_f)
                    iterations += 1
                    break
            iterations += 1
            trace.append(best_f)
            log(f'mpc iter {iterations}: cost={best_f:.6f} step={step:.3g}', level=Logger.DEBUG)
    except _BudgetExhausted:
        exhausted = True
        log(
            f'MPC evaluation budget of {config.max_evaluations} exhausted, returning best plan '
            f'found (cost {best_f:.6f})',
            level=Logger.WARNING
        )

    best_plan = ControlPlan.from_vector(best_x)
    cost, predicted = _rollout(best_plan, state, forecast, config, params, reach)
    if cost.j_total > warm_cost.j_total:
        best_plan = ControlPlan.from_vector(warm)
        cost, predicted = _rollout(best_plan, state, forecast, config, params, reach)
    realized = ControlPlan(tuple(out.controls for out in predicted))
    if realized.within(config):
        realized_cost, realized_predicted = _rollout(
            realized, state, forecast, config, params, reach
        )
        if realized_cost.j_total <= cost.j_total:
            best_plan, cost, predicted = realized, realized_cost, realized_predicted
    return MpcResult(
        plan=best_plan,
        cost=cost,
        warm_cost=warm_cost,
        evaluations=objective.evaluations,
        iterations=iterations,
        budget_exhausted=exhausted,
        cost_trace=tuple(trace),
        predicted=tuple(predicted)
    )

@dataclass(frozen=True)
class ControllerStep:
    """
    Setpoints applied over the next sampling interval

    Args:
        bypass (SetpointDecision): Fill (bypass) actuator decision
        empty (SetpointDecision): Empty actuator decision
        warm_start (ControlPlan): Shifted plan for the next call
        result (MpcResult): The underlying optimization result
    """
    bypass: SetpointDecision
    empty: SetpointDecision
    warm_start: ControlPlan
    result: MpcResult

def fit_window(window: Sequence[LmInputs], horizon: int, logger: Logger | None = None) -> list[LmInputs]:
    """
    Truncate a forecast window to the horizon or pad it by repeating its last entry
    """
    if len(window) == 0:
        raise UsageError('Forecast window must not be empty')
    if len(window) < horizon:
        log_fn(logger)(
            f'Forecast window of {len(window)} steps padded to {horizon} by persistence',
            level=Logger.DEBUG
        )
        return [*window, *([window[-1]] * (horizon - len(window)))]
    return list(window[:horizon])

def receding_horizon_controller(
    state: LmState,
    window: Sequence[LmInputs],
    previous: ControlPlan | None,
    config: OcpConfig,
    tables: ActuationTables = DEFAULT_TABLES,
    params: LmParams = DEFAULT_PARAMS,
    logger: Logger | None = None
) -> ControllerStep:
    """
    Solve the MPC problem and convert the first plan step into actuator openings

    The fill conversion uses the forecast arriving flow of the applied step, the empty conversion
    uses the current tank level, the converted bypass flow and the forecast inlet 4 flow

    Args:
        state (LmState): Current model state
        window (Sequence[LmInputs]): Forecast disturbances, padded or truncated to the horizon
        previous (ControlPlan | None): Warm start from the previous step, a constant plan at
        state.u_prev if None
        config (OcpConfig): Problem settings
        tables (optional ActuationTables default: DEFAULT_TABLES): Conversion tables
        params (optional LmParams default: DEFAULT_PARAMS): Model parameters
        logger (optional Logger | None default: None): Passed to solve_mpc

    Returns:
        ControllerStep: The setpoints, the next warm start and the optimization result
    """
    forecast = fit_window(window, config.horizon, logger)
    warm = previous if previous is not None else ControlPlan.constant(state.u_prev, config.horizon)
    result = solve_mpc(state, forecast, warm, config, params, logger, tables)
    first = result.plan.steps[0]
    bypass = select_setpoint(first.g_out_a, 'fill', FillContext(forecast[0].q_in5), tables)
    empty = select_setpoint(
        first.g_empt_a,
        'empty',
        EmptyContext(level_from_volume(state.v_abro, params), bypass.predicted, forecast[0].q_in4),
        tables
    )
    return ControllerStep(bypass, empty, result.plan.shifted(), result)
