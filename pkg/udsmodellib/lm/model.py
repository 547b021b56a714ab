"""
Discrete-time simplified model of the left margin (LM) of the Madrid pilot

The P_7 <-> L_7 algebraic loop is broken with a unit delay on L_7
"""

from dataclasses import dataclass, field, fields as dc_fields
import math
from typing import Sequence

from ..hydraulics import FLOW_TOL, TankState, capacity_split, check_flow, check_interval, tank_step
from ..util.errors import DomainError, ModelEvaluationError, UsageError
from ..util.types import Logger, log_fn
from .params import DEFAULT_PARAMS, LmParams

__all__ = [
    'LmControls',
    'LmInputs',
    'LmState',
    'ClampLog',
    'LmOutputs',
    'OUTPUT_COLUMNS',
    'pump_curve',
    'level_from_volume',
    'clamp_controls',
    'lm_step',
    'lm_simulate',
]

# Largest exponent evaluated in the pump curve, above it the curve is at its floor
_MAX_EXPONENT = 700.0

@dataclass(frozen=True, slots=True)
class LmControls:
    """
    Actuator flows of the Abronigales tank (m3/s)

    Args:
        g_out_a (float): Flow bypassing the tank
        g_empt_a (float): Flow emptying the tank
    """
    g_out_a: float = 0.0
    g_empt_a: float = 0.0

@dataclass(frozen=True, slots=True)
class LmInputs:
    """
    Exogenous inflows of one sampling interval (m3/s)
    """
    q_in4: float = 0.0
    q_in5: float = 0.0
    q_in6: float = 0.0
    q_md_mi: float = 0.0

    def total(self) -> float:
        return self.q_in4 + self.q_in5 + self.q_in6 + self.q_md_mi

@dataclass(frozen=True, slots=True)
class LmState:
    """
    State carried between steps

    Args:
        v_abro (float): Stored volume of the Abronigales tank (m3)
        l7_prev (optional float default: 0.868): Virtual N12 level of the previous step
        u_prev (optional LmControls default: LmControls()): Previously applied actuator flows
    """
    v_abro: float = 0.0
    l7_prev: float = 0.868
    u_prev: LmControls = field(default_factory=LmControls)

    @classmethod
    def initial(cls, params: LmParams = DEFAULT_PARAMS, v_abro: float = 0.0) -> 'LmState':
        """
        Quiescent state: L_7 at its all-zero-flow value and no previous actuation
        """
        return cls(v_abro, params.quiescent_l7, LmControls())

@dataclass(frozen=True, slots=True)
class ClampLog:
    """
    Per-step record of every clamp applied by lm_step and of the mass the data-based equations do
    not conserve

    Control and floor entries are nonnegative magnitudes. Mass terms are signed node imbalances
    (inflow minus outflow, m3/s); their sum is `correction`
    """
    g_out_a: float = 0.0
    g_empt_a: float = 0.0
    q1216_floor: float = 0.0
    la_gavia_inner_floor: float = 0.0
    q_out_la_gavia_floor: float = 0.0
    q_mi2_floor: float = 0.0
    q_cso5_1_floor: float = 0.0
    split: float = 0.0
    n12: float = 0.0
    la_gavia_excess: float = 0.0
    la_gavia_outfall: float = 0.0
    tank: float = 0.0

    @property
    def controls_clamped(self) -> bool:
        return self.g_out_a > FLOW_TOL or self.g_empt_a > FLOW_TOL

    @property
    def correction(self) -> float:
        """
        Net flow (m3/s) that leaves the network through no named outlet
        """
        return self.split + self.n12 + self.la_gavia_excess - self.la_gavia_outfall + self.tank

@dataclass(frozen=True, slots=True)
class LmOutputs: #pylint: disable=too-many-instance-attributes
    """
    Every named flow of one LM step (m3/s), the virtual level l7, the realized controls and the
    tank volume at the end of the step (m3)
    """
    q_mi: float
    g_in_a: float
    q_cso4: float
    q_1216: float
    q_la_gavia: float
    q_biol: float
    q_sec: float
    q_out_la_gavia: float
    q_mi2: float
    q_cso5_1: float
    q_cso5: float
    l7: float
    p7: float
    q_mi3: float
    q_wwtp_sur: float
    q_cso_sur: float
    g_out_a: float
    g_empt_a: float
    v_abro: float
    corrections: ClampLog = field(default_factory=ClampLog)

    @property
    def controls(self) -> LmControls:
        return LmControls(self.g_out_a, self.g_empt_a)

    @property
    def total_cso(self) -> float:
        return self.q_cso4 + self.q_cso5 + self.q_cso_sur

    def as_row(self) -> dict[str, float]:
        """
        Flat mapping of every numeric output, in declaration order
        """
        return {
            f.name: getattr(self, f.name) for f in dc_fields(self) if f.name != 'corrections'
        }

OUTPUT_COLUMNS: tuple[str, ...] = tuple(
    f.name for f in dc_fields(LmOutputs) if f.name != 'corrections'
)

def _finite(equation: str, value: float) -> float:
    if not math.isfinite(value):
        raise ModelEvaluationError(equation, value)
    return value

def pump_curve(l7: float, coeffs: Sequence[float]) -> float:
    """
    Level-to-flow curve of pump P_7: a / (b + exp(c*L + d)) + e
    """
    num, offset, slope, shift, floor = coeffs
    exponent = slope * l7 + shift
    if exponent > _MAX_EXPONENT:
        return floor
    return num / (offset + math.exp(exponent)) + floor

def level_from_volume(v: float, params: LmParams = DEFAULT_PARAMS) -> float:
    """
    Water depth (m) of the Abronigales tank for a stored volume

    Args:
        v (float): Stored volume (m3)
        params (optional LmParams default: DEFAULT_PARAMS): Model parameters

    Returns:
        float: v / tank_area
    """
    return v / params.tank_area

def clamp_controls(
    state: LmState,
    inputs: LmInputs,
    controls: LmControls,
    dt: float,
    params: LmParams = DEFAULT_PARAMS
) -> LmControls:
    """
    Project actuator flows onto their feasible box for the current state and inputs

    The bypass is kept within [max(0, q_in5 - q_in_max), q_in5] and the emptying flow within
    [0, min(q_out_max, v_abro/dt)]
    """
    g_out_lo = max(0.0, inputs.q_in5 - params.q_abro_in_max)
    g_out = min(max(controls.g_out_a, g_out_lo), inputs.q_in5)
    g_empt = min(max(controls.g_empt_a, 0.0), params.q_abro_out_max, max(state.v_abro, 0.0) / dt)
    return LmControls(g_out, g_empt)

def lm_step(
    state: LmState,
    inputs: LmInputs,
    controls: LmControls,
    dt: float,
    params: LmParams = DEFAULT_PARAMS,
    logger: Logger | None = None
) -> tuple[LmState, LmOutputs]:
    """
    Advance the LM model by one sampling interval

    Controls outside their feasible box are clamped, not rejected, and the clamp is recorded in
    the returned outputs' corrections

    Args:
        state (LmState): State at the start of the interval
        inputs (LmInputs): Exogenous inflows over the interval
        controls (LmControls): Requested actuator flows
        dt (float): Sampling interval (s)
        params (optional LmParams default: DEFAULT_PARAMS): Model parameters
        logger (optional Logger | None default: None): Receives a warning when controls are clamped

    Returns:
        tuple[LmState, LmOutputs]: The next state and the outputs of the interval

    Raises:
        DomainError: On negative or non-finite inflows or an out of range state
        ModelEvaluationError: If an equation evaluates to a non-finite value
    """
    check_interval(dt)
    for name in ('q_in4', 'q_in5', 'q_in6', 'q_md_mi'):
        check_flow(name, getattr(inputs, name))
    if not math.isfinite(state.l7_prev):
        raise DomainError(f'l7_prev must be finite, got {state.l7_prev!r}')
    for name, val in (('g_out_a', controls.g_out_a), ('g_empt_a', controls.g_empt_a)):
        if not math.isfinite(val):
            raise DomainError(f'{name} must be finite, got {val!r}')

    applied = clamp_controls(state, inputs, controls, dt, params)
    clamp_out = abs(controls.g_out_a - applied.g_out_a)
    clamp_empt = abs(controls.g_empt_a - applied.g_empt_a)
    if clamp_out > FLOW_TOL or clamp_empt > FLOW_TOL:
        log_fn(logger)(
            f'Controls clamped: g_out_a {controls.g_out_a:.6g} -> {applied.g_out_a:.6g}, '
            f'g_empt_a {controls.g_empt_a:.6g} -> {applied.g_empt_a:.6g}',
            level=Logger.WARNING
        )

    p7 = _finite('P_7 pump curve', pump_curve(state.l7_prev, params.p7))

    a, b, c = params.q1216
    q1216_raw = _finite('Q_1216', a * inputs.q_in6 ** 2 + b * inputs.q_in6 + c)
    q_1216 = max(0.0, q1216_raw)

    diverted_raw = inputs.q_in6 - q_1216
    diverted = max(0.0, diverted_raw)
    q_la_gavia, la_gavia_excess = capacity_split(p7 + diverted, params.la_gavia_cap)
    q_biol = min(params.la_gavia_biol_cap, q_la_gavia)
    q_sec = q_la_gavia - q_biol
    q_out_raw = q_sec - q_biol
    q_out_la_gavia = max(0.0, q_out_raw)

    g_in_a = inputs.q_in5 - applied.g_out_a
    q_mi = inputs.q_in4 + applied.g_empt_a + applied.g_out_a

    a, b, c, d = params.q_mi2
    q_mi2_raw = _finite('Q_mi2', a * q_1216 ** 2 + b * q_mi ** 2 + c * q_1216 + d * q_mi)
    q_mi2 = max(0.0, q_mi2_raw)
    a, b, c, d = params.q_cso5_1
    q_cso5_1_raw = _finite('Q_CSO5.1', a * q_1216 ** 2 + b * q_mi ** 2 + c * q_1216 + d * q_mi)
    q_cso5_1 = max(0.0, q_cso5_1_raw)
    q_cso5 = q_cso5_1 + q_out_la_gavia

    a, b, c, d, e = params.l7
    l7 = _finite('L_7', a * q_mi2 + b * q_cso5 + c * q_1216 + d * q_mi + e)

    tank_params = params.tank
    raw_volume = state.v_abro + dt * (max(g_in_a, 0.0) - applied.g_empt_a)
    tank, q_cso4 = tank_step(
        TankState(state.v_abro), max(g_in_a, 0.0), applied.g_empt_a, dt, tank_params
    )

    q_mi3 = q_mi2 + inputs.q_md_mi
    q_wwtp_sur, q_cso_sur = capacity_split(q_mi3, params.sur_cap)

    corrections = ClampLog(
        g_out_a=clamp_out,
        g_empt_a=clamp_empt,
        q1216_floor=max(0.0, -q1216_raw),
        la_gavia_inner_floor=max(0.0, -diverted_raw),
        q_out_la_gavia_floor=max(0.0, -q_out_raw),
        q_mi2_floor=max(0.0, -q_mi2_raw),
        q_cso5_1_floor=max(0.0, -q_cso5_1_raw),
        split=inputs.q_in6 - q_1216 - diverted,
        n12=q_1216 + q_mi - q_mi2 - q_cso5_1 - p7,
        la_gavia_excess=la_gavia_excess,
        la_gavia_outfall=q_out_la_gavia,
        tank=(raw_volume - tank.volume) / dt - q_cso4
    )
    outputs = LmOutputs(
        q_mi=q_mi,
        g_in_a=g_in_a,
        q_cso4=q_cso4,
        q_1216=q_1216,
        q_la_gavia=q_la_gavia,
        q_biol=q_biol,
        q_sec=q_sec,
        q_out_la_gavia=q_out_la_gavia,
        q_mi2=q_mi2,
        q_cso5_1=q_cso5_1,
        q_cso5=q_cso5,
        l7=l7,
        p7=p7,
        q_mi3=q_mi3,
        q_wwtp_sur=q_wwtp_sur,
        q_cso_sur=q_cso_sur,
        g_out_a=applied.g_out_a,
        g_empt_a=applied.g_empt_a,
        v_abro=tank.volume,
        corrections=corrections
    )
    return LmState(tank.volume, l7, applied), outputs

def lm_simulate(
    initial: LmState,
    inputs: Sequence[LmInputs],
    controls: Sequence[LmControls],
    dt: float,
    params: LmParams = DEFAULT_PARAMS,
    logger: Logger | None = None
) -> list[LmOutputs]:
    """
    Run lm_step over aligned input and control series

    Args:
        initial (LmState): The state before the first step
        inputs (Sequence[LmInputs]): Inflows per step
        controls (Sequence[LmControls]): Requested actuator flows per step
        dt (float): Sampling interval (s)
        params (optional LmParams default: DEFAULT_PARAMS): Model parameters
        logger (optional Logger | None default: None): Passed to every step

    Returns:
        list[LmOutputs]: The outputs of every step

    Raises:
        UsageError: If the series are empty or of different lengths
    """
    if len(inputs) != len(controls):
        raise UsageError(
            f'Input and control series lengths differ: {len(inputs)} != {len(controls)}'
        )
    if len(inputs) == 0:
        raise UsageError('Input and control series must not be empty')
    state = initial
    res: list[LmOutputs] = []
    for step_inputs, step_controls in zip(inputs, controls):
        state, outputs = lm_step(state, step_inputs, step_controls, dt, params, logger)
        res.append(outputs)
    return res
