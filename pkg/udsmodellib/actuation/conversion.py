"""
Flow-setpoint conversion: evaluate the per-opening conversion functions and map a target flow back
to an actuator opening
"""

from dataclasses import dataclass
import math
from typing import Literal

from ..util.errors import UsageError
from .tables import DEFAULT_TABLES, ActuationTables, EmptyConversionParams, FillConversionParams

__all__ = [
    'Family',
    'FAMILIES',
    'FillContext',
    'EmptyContext',
    'Context',
    'SetpointDecision',
    'fill_flow',
    'empty_flow',
    'grid_values',
    'flow_at_opening',
    'select_setpoint',
]

Family = Literal['fill', 'empty']
FAMILIES: tuple[Family, ...] = ('fill', 'empty')

@dataclass(frozen=True, slots=True)
class FillContext:
    """
    Input of the fill (bypass) conversion: flow arriving at the tank (m3/s)
    """
    q_in5: float

@dataclass(frozen=True, slots=True)
class EmptyContext:
    """
    Inputs of the empty conversion: tank level (m), bypass flow and inlet 4 flow (m3/s)
    """
    d_abro: float
    g_out_a: float
    q_in4: float

Context = FillContext | EmptyContext

@dataclass(frozen=True, slots=True)
class SetpointDecision:
    """
    Opening chosen for a target flow

    Args:
        family (Family): The converted actuator
        opening (float): Opening in [0, 100] (%)
        lower (int): Grid index of the lower bracketing opening
        upper (int): Grid index of the upper bracketing opening
        target (float): The requested flow (m3/s)
        predicted (float): Flow the conversion functions give at the opening (m3/s)
        saturated (bool): Whether no pair of grid values brackets the target
    """
    family: Family
    opening: float
    lower: int
    upper: int
    target: float
    predicted: float
    saturated: bool

def _check_index(i: int, n: int) -> None:
    if not 0 <= i < n:
        raise UsageError(f'Grid index {i} outside [0, {n - 1}]')

def fill_flow(i: int, q_in5: float, params: FillConversionParams = DEFAULT_TABLES.fill) -> float:
    """
    Bypass flow G_outA of grid opening i for an arriving flow q_in5

    The log term is dropped when e <= 0 or q_in5 == 0. The result is floored at 0; capping at
    q_in5 happens where the flow is realized (see grid_values)

    Args:
        i (int): Grid index
        q_in5 (float): Flow arriving at the tank (m3/s)
        params (optional FillConversionParams default: DEFAULT_TABLES.fill): Parameter rows

    Returns:
        float: The converted flow (m3/s)
    """
    _check_index(i, len(params.rows))
    if not math.isfinite(q_in5) or q_in5 < 0.0:
        raise UsageError(f'q_in5 must be finite and >= 0, got {q_in5!r}')
    row = params.rows[i]
    if q_in5 < row.p:
        flow = row.m * (q_in5 - row.x) + row.y
    else:
        flow = row.a * q_in5 ** 2 + row.b * q_in5 + row.c
        if row.e > 0.0 and q_in5 > 0.0:
            flow += row.d * math.log(row.e * q_in5)
    return max(0.0, flow)

def empty_flow(
    i: int,
    d_abro: float,
    g_out_a: float,
    q_in4: float,
    params: EmptyConversionParams = DEFAULT_TABLES.empty
) -> float:
    """
    Tank emptying flow G_emptA of grid opening i, floored at 0
    """
    _check_index(i, len(params.rows))
    for name, val in (('d_abro', d_abro), ('g_out_a', g_out_a), ('q_in4', q_in4)):
        if not math.isfinite(val) or val < 0.0:
            raise UsageError(f'{name} must be finite and >= 0, got {val!r}')
    row = params.rows[i]
    return max(0.0, row.f * d_abro ** 2 + row.g * d_abro + row.h * g_out_a + row.r * q_in4 + row.s)

def grid_values(
    family: Family,
    context: Context,
    tables: ActuationTables = DEFAULT_TABLES,
    realizable: bool = True
) -> list[float]:
    """
    Flow of every grid opening under a context

    With realizable, fill flows are capped at the arriving flow q_in5, otherwise the raw conversion
    function values are returned
    """
    n = len(tables.grid)
    if family == 'fill':
        if not isinstance(context, FillContext):
            raise UsageError('fill conversion needs a FillContext')
        values = [fill_flow(i, context.q_in5, tables.fill) for i in range(n)]
        return [min(val, context.q_in5) for val in values] if realizable else values
    if family == 'empty':
        if not isinstance(context, EmptyContext):
            raise UsageError('empty conversion needs an EmptyContext')
        return [
            empty_flow(i, context.d_abro, context.g_out_a, context.q_in4, tables.empty)
            for i in range(n)
        ]
    raise UsageError(f'Unknown conversion family "{family}"')

def flow_at_opening(
    family: Family,
    opening: float,
    context: Context,
    tables: ActuationTables = DEFAULT_TABLES,
    realizable: bool = True
) -> float:
    """
    Flow of any opening in [0, 100], linear in the opening between the bracketing grid flows
    (see grid_values for realizable)

    Raises:
        UsageError: If the opening is outside [0, 100]
    """
    try:
        i, weight = tables.grid.bracket(opening)
    except ValueError as err:
        raise UsageError(str(err)) from err
    values = grid_values(family, context, tables, realizable)
    if weight == 0.0:
        return values[i]
    if weight == 1.0:
        return values[i + 1]
    return (1.0 - weight) * values[i] + weight * values[i + 1]

def _closest(values: list[float], target: float) -> int:
    # min keeps the first (lowest opening) of equally close values
    return min(range(len(values)), key=lambda i: abs(values[i] - target))

def select_setpoint(
    target: float,
    family: Family,
    context: Context,
    tables: ActuationTables = DEFAULT_TABLES,
    interpolate: bool = True
) -> SetpointDecision:
    """
    Map a target flow to an actuator opening

    With interpolate the lowest pair of adjacent grid openings whose flows bracket the target is
    used and the opening is interpolated linearly between them. Without a bracket, or without
    interpolate, the grid opening with the closest flow is chosen, ties going to the lower opening

    Args:
        target (float): Requested flow (m3/s)
        family (Family): 'fill' or 'empty'
        context (Context): Conversion inputs matching the family
        tables (optional ActuationTables default: DEFAULT_TABLES): Grid and parameter tables
        interpolate (optional bool default: True): Whether to interpolate between grid openings

    Returns:
        SetpointDecision: The chosen opening and the flow it yields
    """
    if not math.isfinite(target) or target < 0.0:
        raise UsageError(f'target flow must be finite and >= 0, got {target!r}')
    values = grid_values(family, context, tables)
    openings = tables.grid.openings
    bracket: int | None = None
    for i in range(len(values) - 1):
        if min(values[i], values[i + 1]) <= target <= max(values[i], values[i + 1]):
            bracket = i
            break
    if interpolate and bracket is not None:
        lo, hi = values[bracket], values[bracket + 1]
        if hi == lo:
            return SetpointDecision(
                family, openings[bracket], bracket, bracket + 1, target, lo, False
            )
        weight = (target - lo) / (hi - lo)
        if weight >= 1.0:
            return SetpointDecision(
                family, openings[bracket + 1], bracket, bracket + 1, target, hi, False
            )
        opening = openings[bracket] + weight * (openings[bracket + 1] - openings[bracket])
        return SetpointDecision(family, opening, bracket, bracket + 1, target, target, False)
    i = _closest(values, target)
    return SetpointDecision(family, openings[i], i, i, target, values[i], bracket is None)
