"""
Plant-in-the-loop simulation of a controller over a scenario, with KPI accounting and conversion
diagnostics
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import math
from typing import Any, Protocol, Sequence

import numpy as np
import pandas as pd

from ..actuation import ActuationTables, EmptyContext, FillContext, flow_at_opening
from ..config.app import AppConfig, PlantConfig
from ..control import (
    ControlPlan,
    MpcResult,
    Observation,
    OcpConfig,
    RbcRuleSet,
    rbc_step,
    receding_horizon_controller
)
from ..datafit import metrics
from ..lm import OUTPUT_COLUMNS, LmControls, LmInputs, LmOutputs, LmParams, LmState, level_from_volume, lm_step
from ..util.errors import UsageError
from ..util.types import Logger, log_fn
from .scenario import FLOW_COLUMNS, Scenario

__all__ = [
    'CONTROLLERS',
    'TRACE_HEADER',
    'CONVERSION_COLUMNS',
    'COMPARISON_ROWS',
    'ControlDecision',
    'Controller',
    'FixedController',
    'RbcController',
    'MpcController',
    'Plant',
    'KpiReport',
    'kpi_report',
    'ConversionDiagnostics',
    'RunResult',
    'make_controller',
    'run_closed_loop',
    'format_delta',
    'ComparisonRow',
    'Comparison',
    'compare_runs',
    'compare_controllers',
    'run_batch',
]

CONTROLLERS: tuple[str, ...] = ('mpc', 'rbc', 'fixed')

TRACE_HEADER = 'step,entry,cost,evaluations,iterations,budget_exhausted'

@dataclass(frozen=True, slots=True)
class ControlDecision:
    """
    Openings (%) applied over one step, with the flows the controller asked for (MPC only)
    """
    bypass_opening: float
    empty_opening: float
    target_g_out_a: float | None = None
    target_g_empt_a: float | None = None
    mpc: MpcResult | None = None

class Controller(Protocol):
    """
    A closed-loop controller: decides the openings of a step from what it observes
    """

    name: str

    def decide(
        self,
        k: int,
        state: LmState,
        scenario: Scenario,
        previous: LmOutputs | None
    ) -> ControlDecision:
        """
        Decide the openings of step k
        """

class FixedController(Controller):
    """
    Holds constant openings
    """

    def __init__(self, bypass_opening: float = 100.0, empty_opening: float = 0.0) -> None:
        self.name = 'fixed'
        self.bypass_opening = bypass_opening
        self.empty_opening = empty_opening

    def decide(
        self,
        k: int,
        state: LmState,
        scenario: Scenario,
        previous: LmOutputs | None
    ) -> ControlDecision:
        return ControlDecision(self.bypass_opening, self.empty_opening)

class RbcController(Controller):
    """
    Rule-based baseline observing the current inflows, state and previous outputs
    """

    def __init__(self, rules: RbcRuleSet, tables: ActuationTables, params: LmParams) -> None:
        self.name = 'rbc'
        self.rules = rules
        self.tables = tables
        self.params = params

    def decide(
        self,
        k: int,
        state: LmState,
        scenario: Scenario,
        previous: LmOutputs | None
    ) -> ControlDecision:
        observation = Observation(state, scenario.inputs[k], previous)
        bypass, empty = rbc_step(observation, self.rules, self.tables, self.params)
        return ControlDecision(bypass, empty)

class MpcController(Controller):
    """
    Receding horizon MPC, warm started from the shifted plan of the previous step

    Args:
        config (OcpConfig): Problem settings
        tables (ActuationTables): Conversion tables
        params (LmParams): Model parameters
        logger (optional Logger | None default: None): Passed to the solver
        trace (optional Logger | None default: None): Receives one CSV line per cost trace entry
    """

    def __init__(
        self,
        config: OcpConfig,
        tables: ActuationTables,
        params: LmParams,
        logger: Logger | None = None,
        trace: Logger | None = None
    ) -> None:
        self.name = 'mpc'
        self.config = config
        self.tables = tables
        self.params = params
        self.logger = logger
        self.trace = trace
        self.warm_start: ControlPlan | None = None

    def decide(
        self,
        k: int,
        state: LmState,
        scenario: Scenario,
        previous: LmOutputs | None
    ) -> ControlDecision:
        window = scenario.window(k, self.config.horizon, self.config.forecast)
        step = receding_horizon_controller(
            state, window, self.warm_start, self.config, self.tables, self.params, self.logger
        )
        self.warm_start = step.warm_start
        result = step.result
        if self.trace is not None:
            for entry, cost in enumerate(result.cost_trace):
                self.trace.log(
                    f'{k},{entry},{cost!r},{result.evaluations},{result.iterations},'
                    f'{str(result.budget_exhausted).lower()}'
                )
        # targets are the optimized flows, not the conversion at the chosen opening
        target = result.plan.steps[0]
        return ControlDecision(
            step.bypass.opening,
            step.empty.opening,
            target.g_out_a,
            target.g_empt_a,
            result
        )

class Plant:
    """
    The LM model driven by actuator openings: openings are converted to flows with the conversion
    functions, optionally perturbed, and applied by lm_step

    Args:
        params (LmParams): Model parameters
        tables (ActuationTables): Conversion tables
        config (PlantConfig): Perturbation and initial conditions
        dt (float): Sampling interval (s)
    """

    def __init__(self, params: LmParams, tables: ActuationTables, config: PlantConfig, dt: float) -> None:
        self.params = params
        self.tables = tables
        self.config = config
        self.dt = dt
        self.rng = np.random.default_rng(config.seed)
        l7 = config.initial_l7 if config.initial_l7 is not None else params.quiescent_l7
        self.state = LmState(config.initial_volume, l7, LmControls())

    def realize(self, state: LmState, inputs: LmInputs, decision: ControlDecision) -> LmControls:
        """
        Actuator flows the openings give under the actual plant conditions
        """
        g_out_a = flow_at_opening('fill', decision.bypass_opening, FillContext(inputs.q_in5), self.tables)
        if self.config.perturbation > 0.0:
            g_out_a *= 1.0 + self.config.perturbation * self.rng.uniform(-1.0, 1.0)
        context = EmptyContext(level_from_volume(state.v_abro, self.params), g_out_a, inputs.q_in4)
        g_empt_a = flow_at_opening('empty', decision.empty_opening, context, self.tables)
        if self.config.perturbation > 0.0:
            g_empt_a *= 1.0 + self.config.perturbation * self.rng.uniform(-1.0, 1.0)
        return LmControls(g_out_a, g_empt_a)

    def step(
        self,
        inputs: LmInputs,
        decision: ControlDecision,
        logger: Logger | None = None
    ) -> LmOutputs:
        controls = self.realize(self.state, inputs, decision)
        self.state, outputs = lm_step(self.state, inputs, controls, self.dt, self.params, logger)
        return outputs

@dataclass(frozen=True)
class KpiReport: #pylint: disable=too-many-instance-attributes
    """
    Cumulative volumes of a run (10^3 m3)

    closure_residual is what is left of the inflow volume after storage, WWTP, CSO and logged
    correction volumes, zero up to rounding
    """
    controller: str
    scenario: str
    steps: int
    dt: float
    q_cso4: float
    q_cso5: float
    q_cso_sur: float
    q_wwtp_sur: float
    q_la_gavia: float
    inflow: float
    storage_change: float
    corrections: float

    @property
    def total_cso(self) -> float:
        return self.q_cso4 + self.q_cso5 + self.q_cso_sur

    @property
    def closure_residual(self) -> float:
        return (
            self.inflow - self.storage_change - self.q_wwtp_sur - self.q_la_gavia - self.total_cso
            - self.corrections
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            'controller': self.controller,
            'scenario': self.scenario,
            'steps': self.steps,
            'dt': self.dt,
            'units': '10^3 m3',
            'volumes': {
                'qCso4': self.q_cso4,
                'qCso5': self.q_cso5,
                'qCsoSur': self.q_cso_sur,
                'qWwtpSur': self.q_wwtp_sur,
                'qLaGavia': self.q_la_gavia,
                'totalCso': self.total_cso,
            },
            'massBalance': {
                'inflow': self.inflow,
                'storageChange': self.storage_change,
                'corrections': self.corrections,
                'closureResidual': self.closure_residual,
            },
        }

def _volume(dt: float, flows: list[float]) -> float:
    return dt * math.fsum(flows) / 1000.0

def kpi_report(
    controller: str,
    scenario: Scenario,
    outputs: list[LmOutputs],
    initial_volume: float
) -> KpiReport:
    """
    Integrate the KPI volumes of a run
    """
    dt = scenario.dt
    return KpiReport(
        controller=controller,
        scenario=scenario.name,
        steps=len(outputs),
        dt=dt,
        q_cso4=_volume(dt, [out.q_cso4 for out in outputs]),
        q_cso5=_volume(dt, [out.q_cso5 for out in outputs]),
        q_cso_sur=_volume(dt, [out.q_cso_sur for out in outputs]),
        q_wwtp_sur=_volume(dt, [out.q_wwtp_sur for out in outputs]),
        q_la_gavia=_volume(dt, [out.q_la_gavia for out in outputs]),
        inflow=_volume(dt, [inputs.total() for inputs in scenario.inputs[:len(outputs)]]),
        storage_change=((outputs[-1].v_abro if outputs else initial_volume) - initial_volume) / 1000.0,
        corrections=_volume(dt, [out.corrections.correction for out in outputs]),
    )

@dataclass(frozen=True)
class ConversionDiagnostics:
    """
    Flows the MPC expected its setpoints to give against the flows the plant realized

    Args:
        frame (pd.DataFrame): One row per step: step, target and realized flow and opening of
        each actuator
        r2_g_out_a (float | None): R2 of the bypass flows, None if undefined
        r2_g_empt_a (float | None): R2 of the emptying flows, None if undefined
    """
    frame: pd.DataFrame
    r2_g_out_a: float | None = None
    r2_g_empt_a: float | None = None

    @classmethod
    def from_rows(cls, rows: list[dict[str, float]]) -> 'ConversionDiagnostics':
        frame = pd.DataFrame(rows, columns=CONVERSION_COLUMNS)
        if frame.empty:
            return cls(frame)
        return cls(
            frame,
            metrics(frame['target_g_out_a'], frame['realized_g_out_a']).r2,
            metrics(frame['target_g_empt_a'], frame['realized_g_empt_a']).r2
        )

CONVERSION_COLUMNS: list[str] = [
    'step', 'bypass_opening', 'target_g_out_a', 'realized_g_out_a',
    'empty_opening', 'target_g_empt_a', 'realized_g_empt_a',
]

@dataclass(frozen=True)
class RunResult:
    """
    Everything a closed-loop run produced
    """
    scenario: Scenario
    controller: str
    trajectories: pd.DataFrame
    kpi: KpiReport
    conversion: ConversionDiagnostics
    outputs: list[LmOutputs] = field(default_factory=list)
    mpc_results: list[MpcResult] = field(default_factory=list)

    @property
    def realized(self) -> list[LmControls]:
        return [out.controls for out in self.outputs]

def make_controller(
    name: str,
    config: AppConfig,
    ocp: OcpConfig,
    logger: Logger | None = None,
    trace: Logger | None = None
) -> Controller:
    """
    Build a controller by name: 'mpc', 'rbc' or 'fixed'

    Raises:
        UsageError: If the name is unknown
    """
    if name == 'mpc':
        return MpcController(ocp, config.actuation, config.model, logger, trace)
    if name == 'rbc':
        return RbcController(config.rbc, config.actuation, config.model)
    if name == 'fixed':
        return FixedController(config.fixed.bypass_opening, config.fixed.empty_opening)
    raise UsageError(f'Unknown controller "{name}". Expected one of: {", ".join(CONTROLLERS)}')

def run_closed_loop( #pylint: disable=too-many-locals
    scenario: Scenario,
    controller: str,
    config: AppConfig = AppConfig(),
    logger: Logger | None = None,
    trace: Logger | None = None
) -> RunResult:
    """
    Simulate a controller against the plant over a scenario

    Each step the controller decides openings, the plant converts them into flows and advances.
    The scenario sampling interval is used throughout, overriding the configured one

    Args:
        scenario (Scenario): The inflows
        controller (str): 'mpc', 'rbc' or 'fixed'
        config (optional AppConfig default: AppConfig()): Model, actuation, controller and plant
        settings
        logger (optional Logger | None default: None): Progress and warnings
        trace (optional Logger | None default: None): Receives the MPC cost trace as CSV lines

    Returns:
        RunResult: Trajectories, KPIs and conversion diagnostics
    """
    log = log_fn(logger)
    ocp = config.ocp
    if ocp.dt != scenario.dt:
        log(
            f'Scenario dt {scenario.dt:g} s overrides configured dt {ocp.dt:g} s',
            level=Logger.WARNING
        )
        ocp = replace(ocp, dt=scenario.dt)
    ctrl = make_controller(controller, config, ocp, logger, trace)
    plant = Plant(config.model, config.actuation, config.plant, scenario.dt)
    initial_volume = plant.state.v_abro
    log(f'Running {ctrl.name} on {scenario.name} ({len(scenario)} steps)', level=Logger.INFO)

    outputs: list[LmOutputs] = []
    rows: list[dict[str, Any]] = []
    conversion_rows: list[dict[str, float]] = []
    mpc_results: list[MpcResult] = []
    previous: LmOutputs | None = None
    for k, inputs in enumerate(scenario.inputs):
        decision = ctrl.decide(k, plant.state, scenario, previous)
        out = plant.step(inputs, decision, logger)
        outputs.append(out)
        rows.append({
            'step': k,
            'time_s': scenario.time(k),
            **{col: getattr(inputs, col) for col in FLOW_COLUMNS},
            'bypass_opening': decision.bypass_opening,
            'empty_opening': decision.empty_opening,
            **out.as_row(),
            'correction': out.corrections.correction,
        })
        if decision.mpc is not None:
            mpc_results.append(decision.mpc)
            conversion_rows.append({
                'step': k,
                'bypass_opening': decision.bypass_opening,
                'target_g_out_a': decision.target_g_out_a,
                'realized_g_out_a': out.g_out_a,
                'empty_opening': decision.empty_opening,
                'target_g_empt_a': decision.target_g_empt_a,
                'realized_g_empt_a': out.g_empt_a,
            })
        log(
            f'step {k}: openings ({decision.bypass_opening:.1f}, {decision.empty_opening:.1f}) '
            f'v_abro={out.v_abro:.1f} cso={out.total_cso:.4f}',
            level=Logger.DEBUG
        )
        previous = out

    columns = ['step', 'time_s', *FLOW_COLUMNS, 'bypass_opening', 'empty_opening',
               *OUTPUT_COLUMNS, 'correction']
    kpi = kpi_report(ctrl.name, scenario, outputs, initial_volume)
    log(
        f'{ctrl.name} on {scenario.name}: total CSO {kpi.total_cso:.3f}, WWTP Sur '
        f'{kpi.q_wwtp_sur:.3f} (10^3 m3)',
        level=Logger.INFO
    )
    return RunResult(
        scenario,
        ctrl.name,
        pd.DataFrame(rows, columns=columns),
        kpi,
        ConversionDiagnostics.from_rows(conversion_rows),
        outputs,
        mpc_results
    )

# (label, KpiReport attribute)
COMPARISON_ROWS: tuple[tuple[str, str], ...] = (
    ('Q_CSO4', 'q_cso4'),
    ('Q_CSO5', 'q_cso5'),
    ('Q_CSOSur', 'q_cso_sur'),
    ('Total CSO (LM)', 'total_cso'),
    ('Q_WWTPSur', 'q_wwtp_sur'),
    ('Q_LaGavia', 'q_la_gavia'),
)

def format_delta(baseline: float, candidate: float) -> str:
    """
    Relative change of candidate against baseline, e.g. '-23.9%'
    """
    if baseline == 0.0:
        return '0.0%' if candidate == 0.0 else 'n/a'
    delta = (candidate - baseline) / baseline * 100.0
    if round(delta, 1) == 0.0:
        return '0.0%'
    return f'{delta:+.1f}%'

@dataclass(frozen=True)
class ComparisonRow:
    label: str
    baseline: float
    candidate: float

    @property
    def delta(self) -> str:
        return format_delta(self.baseline, self.candidate)

@dataclass(frozen=True)
class Comparison:
    """
    KPI comparison of two runs over the same scenario
    """
    baseline: RunResult
    candidate: RunResult
    rows: tuple[ComparisonRow, ...]

    def markdown(self) -> str:
        """
        Comparison table as Markdown, byte-identical for identical runs
        """
        base, cand = self.baseline.controller.upper(), self.candidate.controller.upper()
        lines = [
            f'# KPI comparison: {self.baseline.scenario.name}',
            '',
            f'| KPI | {base} (10^3 m3) | {cand} (10^3 m3) | Delta |',
            '|---|---:|---:|---:|',
            *(
                f'| {row.label} | {row.baseline:.2f} | {row.candidate:.2f} | {row.delta} |'
                for row in self.rows
            ),
            '',
        ]
        return '\n'.join(lines)

def compare_runs(baseline: RunResult, candidate: RunResult) -> Comparison:
    """
    Tabulate the KPIs of two runs
    """
    rows = tuple(
        ComparisonRow(label, getattr(baseline.kpi, attr), getattr(candidate.kpi, attr))
        for label, attr in COMPARISON_ROWS
    )
    return Comparison(baseline, candidate, rows)

def compare_controllers(
    scenario: Scenario,
    config: AppConfig = AppConfig(),
    baseline: str = 'rbc',
    candidate: str = 'mpc',
    logger: Logger | None = None,
    trace: Logger | None = None
) -> Comparison:
    """
    Run two controllers on a scenario and compare their KPIs

    Args:
        scenario (Scenario): The inflows
        config (optional AppConfig default: AppConfig()): Shared settings
        baseline (optional str default: 'rbc'): Reference controller
        candidate (optional str default: 'mpc'): Compared controller
        logger (optional Logger | None default: None): Progress and warnings
        trace (optional Logger | None default: None): MPC cost trace sink

    Returns:
        Comparison: Both runs and the KPI rows
    """
    base_run = run_closed_loop(scenario, baseline, config, logger, trace)
    cand_run = run_closed_loop(scenario, candidate, config, logger, trace)
    return compare_runs(base_run, cand_run)

def run_batch(
    scenarios: Sequence[Scenario],
    controller: str,
    config: AppConfig = AppConfig(),
    workers: int = 1,
    logger: Logger | None = None
) -> list[RunResult]:
    """
    Run a controller on several scenarios, each with its own plant and controller state

    Args:
        scenarios (Sequence[Scenario]): The scenarios
        controller (str): 'mpc', 'rbc' or 'fixed'
        config (optional AppConfig default: AppConfig()): Shared settings
        workers (optional int default: 1): Number of worker threads
        logger (optional Logger | None default: None): Progress and warnings

    Returns:
        list[RunResult]: One result per scenario, in input order
    """
    if workers < 1:
        raise UsageError(f'workers must be >= 1, got {workers!r}')
    if workers == 1:
        return [run_closed_loop(scenario, controller, config, logger) for scenario in scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda scenario: run_closed_loop(scenario, controller, config, logger), scenarios))
