"""
Conceptual hydraulic primitives: junction mass balance, storage tank dynamics with overflow and
capacity limited elements
"""

from dataclasses import dataclass
import math
from typing import Iterable

from ..util.errors import DomainError

__all__ = [
    'Flow',
    'FLOW_TOL',
    'check_flow',
    'check_interval',
    'TankParams',
    'TankState',
    'junction_balance',
    'tank_step',
    'capacity_split',
]

# Flow rate in m3/s
Flow = float

# Absolute tolerance used when checking flow bounds
FLOW_TOL = 1e-9

def check_flow(name: str, value: float) -> None:
    """
    Check a flow is finite and nonnegative

    Raises:
        DomainError: If the flow is negative or non-finite
    """
    if not math.isfinite(value) or value < 0.0:
        raise DomainError(f'{name} must be finite and >= 0, got {value!r}')

def check_interval(dt: float) -> None:
    """
    Check a sampling interval (s) is strictly positive

    Raises:
        DomainError: If dt <= 0 or non-finite
    """
    if not math.isfinite(dt) or dt <= 0.0:
        raise DomainError(f'dt must be finite and > 0, got {dt!r}')

@dataclass(frozen=True, slots=True)
class TankParams:
    """
    Physical limits of a storage tank

    Args:
        v_max (float): Maximum storage volume (m3)
        q_in_max (float): Maximum inflow (m3/s)
        q_out_max (float): Maximum outflow (m3/s)
    """
    v_max: float
    q_in_max: float
    q_out_max: float

    def __post_init__(self) -> None:
        for name in ('v_max', 'q_in_max', 'q_out_max'):
            val = getattr(self, name)
            if not math.isfinite(val) or val <= 0.0:
                raise DomainError(f'TankParams.{name} must be finite and > 0, got {val!r}')

@dataclass(frozen=True, slots=True)
class TankState:
    """
    Stored volume of a tank (m3)
    """
    volume: float

def junction_balance(inflows: Iterable[Flow]) -> Flow:
    """
    Single outflow mass balance of a junction node

    Args:
        inflows (Iterable[Flow]): The flows entering the node

    Returns:
        Flow: The flow leaving the node

    Raises:
        DomainError: If any inflow is negative or non-finite
    """
    total = 0.0
    for i, flow in enumerate(inflows):
        check_flow(f'inflows[{i}]', flow)
        total += flow
    return total

def tank_step(
    state: TankState,
    inflow: Flow,
    outflow: Flow,
    dt: float,
    params: TankParams
) -> tuple[TankState, Flow]:
    """
    Advance a storage tank by one sampling interval

    The committed volume is clamped to [0, v_max]; whatever would exceed v_max leaves as overflow

    Args:
        state (TankState): The tank state at the start of the interval
        inflow (Flow): Flow entering the tank (m3/s)
        outflow (Flow): Controlled flow leaving the tank (m3/s)
        dt (float): Sampling interval (s)
        params (TankParams): Tank limits

    Returns:
        tuple[TankState, Flow]: The state at the end of the interval and the overflow (CSO) flow

    Raises:
        DomainError: Listing every violated bound
    """
    check_interval(dt)
    violations: list[str] = []
    if not math.isfinite(inflow) or inflow < -FLOW_TOL:
        violations.append(f'inflow {inflow!r} < 0')
    elif inflow > params.q_in_max + FLOW_TOL:
        violations.append(f'inflow {inflow!r} > q_in_max {params.q_in_max!r}')
    if not math.isfinite(outflow) or outflow < -FLOW_TOL:
        violations.append(f'outflow {outflow!r} < 0')
    else:
        if outflow > params.q_out_max + FLOW_TOL:
            violations.append(f'outflow {outflow!r} > q_out_max {params.q_out_max!r}')
        if outflow > state.volume / dt + FLOW_TOL:
            violations.append(f'outflow {outflow!r} > volume/dt {state.volume / dt!r}')
    if not math.isfinite(state.volume) or not -FLOW_TOL <= state.volume <= params.v_max + FLOW_TOL:
        violations.append(f'volume {state.volume!r} outside [0, {params.v_max!r}]')
    if violations:
        raise DomainError('tank_step bounds violated: ' + '; '.join(violations))

    raw = state.volume + dt * (inflow - outflow)
    cso = max(0.0, raw - params.v_max) / dt
    return TankState(min(max(raw, 0.0), params.v_max)), cso

def capacity_split(inflow: Flow, q_max: Flow) -> tuple[Flow, Flow]:
    """
    Split a flow at a capacity limited element into the conveyed flow and the overflow

    Args:
        inflow (Flow): Flow arriving at the element (m3/s)
        q_max (Flow): Capacity of the element (m3/s)

    Returns:
        tuple[Flow, Flow]: (q_out, q_cso) with q_out + q_cso == inflow

    Raises:
        DomainError: If inflow < 0 or q_max <= 0
    """
    check_flow('inflow', inflow)
    if not math.isfinite(q_max) or q_max <= 0.0:
        raise DomainError(f'q_max must be finite and > 0, got {q_max!r}')
    q_out = min(inflow, q_max)
    return q_out, inflow - q_out
