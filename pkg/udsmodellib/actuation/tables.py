"""
Setpoint grid and per-opening parameter tables of the tank fill (bypass) and empty conversion
functions
"""

from dataclasses import dataclass, fields as dc_fields
import math
from typing import Any

from ..config.utils import (
    ConfigSource,
    FieldTable,
    json_typeof,
    parse_json,
    require_number_list,
    validate_section
)
from ..util.errors import SchemaError

__all__ = [
    'FillRow',
    'EmptyRow',
    'FILL_KEYS',
    'EMPTY_KEYS',
    'SetpointGrid',
    'FillConversionParams',
    'EmptyConversionParams',
    'DEFAULT_FILL',
    'DEFAULT_EMPTY',
    'ACTUATION_FIELDS',
    'ActuationTables',
    'DEFAULT_TABLES',
]

@dataclass(frozen=True, slots=True)
class FillRow: #pylint: disable=too-many-instance-attributes
    """
    Fill conversion parameters of one opening

    Below the discontinuity point p the flow is m*(q - x) + y, above it
    a*q^2 + b*q + c + d*ln(e*q)
    """
    m: float
    x: float
    y: float
    p: float
    a: float
    b: float
    c: float
    d: float
    e: float

@dataclass(frozen=True, slots=True)
class EmptyRow:
    """
    Empty conversion parameters of one opening: f*D^2 + g*D + h*G_outA + r*Q_in4 + s
    """
    f: float
    g: float
    h: float
    r: float
    s: float

FILL_KEYS: tuple[str, ...] = tuple(f.name for f in dc_fields(FillRow))
EMPTY_KEYS: tuple[str, ...] = tuple(f.name for f in dc_fields(EmptyRow))

@dataclass(frozen=True, slots=True)
class SetpointGrid:
    """
    Discrete actuator openings (%)
    """
    openings: tuple[float, ...] = tuple(float(o) for o in range(0, 101, 10))

    def __post_init__(self) -> None:
        openings = self.openings
        if len(openings) < 2 or openings[0] != 0.0 or openings[-1] != 100.0:
            raise ValueError(f'Setpoint grid must start at 0 and end at 100, got {list(openings)}')
        if any(hi <= lo for lo, hi in zip(openings, openings[1:])):
            raise ValueError(f'Setpoint grid must be strictly increasing, got {list(openings)}')

    def __len__(self) -> int:
        return len(self.openings)

    def index_of(self, opening: float) -> int | None:
        """
        Grid index of an opening or None if it is not on the grid
        """
        for i, val in enumerate(self.openings):
            if abs(val - opening) <= 1e-9:
                return i
        return None

    def bracket(self, opening: float) -> tuple[int, float]:
        """
        Lower grid index i and weight w with opening = (1 - w)*o_i + w*o_{i+1}

        Raises:
            ValueError: If the opening is outside [0, 100]
        """
        if not 0.0 <= opening <= 100.0:
            raise ValueError(f'Opening must be within [0, 100], got {opening!r}')
        for i in range(len(self.openings) - 1):
            lo, hi = self.openings[i], self.openings[i + 1]
            if opening <= hi:
                return i, (opening - lo) / (hi - lo)
        return len(self.openings) - 2, 1.0

@dataclass(frozen=True, slots=True)
class FillConversionParams:
    rows: tuple[FillRow, ...]

    def __post_init__(self) -> None:
        for i, row in enumerate(self.rows):
            if not all(math.isfinite(getattr(row, key)) for key in FILL_KEYS):
                raise ValueError(f'Fill row {i} has non-finite parameters')
        if any(hi.p < lo.p for lo, hi in zip(self.rows, self.rows[1:])):
            raise ValueError('Fill discontinuity points p must be nondecreasing in the opening')

@dataclass(frozen=True, slots=True)
class EmptyConversionParams:
    rows: tuple[EmptyRow, ...]

    def __post_init__(self) -> None:
        for i, row in enumerate(self.rows):
            if not all(math.isfinite(getattr(row, key)) for key in EMPTY_KEYS):
                raise ValueError(f'Empty row {i} has non-finite parameters')

# Openings 0, 10, ..., 100
DEFAULT_FILL = FillConversionParams((
    FillRow(0.00, 0.26, 0.10, 0.00, 0.0, 0.0, 0.00, 0.00, 0.3),
    FillRow(0.59, 0.26, 0.10, 0.90, 5e-6, 6e-4, 0.40, 0.01, 5.3e3),
    FillRow(0.93, 0.26, 0.17, 1.10, 3e-5, 6e-4, 0.84, 0.02, 1.5e2),
    FillRow(0.94, 0.26, 0.21, 1.50, -2e-5, 4e-3, 1.32, 0.04, 1.80),
    FillRow(1.04, 0.26, 0.24, 1.80, -9e-5, 8e-3, 1.86, 0.03, 0.18),
    FillRow(1.05, 0.26, 0.26, 2.20, -2e-4, 1e-2, 2.18, 0.03, 9.50),
    FillRow(1.10, 0.26, 0.26, 2.50, -9e-5, 9e-3, 6.10, 0.08, 0.0),
    FillRow(1.10, 0.26, 0.26, 2.90, -2e-4, 2e-2, 2.86, 0.05, 64.1),
    FillRow(1.06, 0.26, 0.26, 3.40, -6e-4, 4e-2, 3.13, -8e-3, 0.0),
    FillRow(1.09, 0.26, 0.26, 3.65, -3e-4, 2e-2, 11.20, 0.20, 0.0),
    FillRow(1.08, 0.26, 0.26, 4.00, 8e-6, -7e-3, 21.19, 0.42, 0.0),
))

DEFAULT_EMPTY = EmptyConversionParams((
    EmptyRow(0.00, 0.00, 0.00, 0.00, 0.00),
    EmptyRow(-0.00, 0.12, -0.02, -0.02, 0.24),
    EmptyRow(-0.01, 0.30, -0.04, -0.03, 0.29),
    EmptyRow(-0.02, 0.47, -0.07, -0.05, 0.36),
    EmptyRow(-0.03, 0.62, -0.10, -0.07, 0.46),
    EmptyRow(-0.03, 0.78, -0.12, -0.10, 0.56),
    EmptyRow(-0.04, 0.93, -0.15, -0.13, 0.66),
    EmptyRow(-0.05, 1.09, -0.18, -0.17, 0.78),
    EmptyRow(-0.06, 1.25, -0.20, -0.21, 0.88),
    EmptyRow(-0.04, 1.11, -0.23, -0.24, 1.66),
    EmptyRow(-0.05, 1.29, -0.27, -0.28, 1.71),
))

ACTUATION_FIELDS: FieldTable = {
    'openings': ('openings', ('array', 'null'), None),
    'fill': ('fill', ('array', 'null'), None),
    'empty': ('empty', ('array', 'null'), None),
}

@dataclass(frozen=True, slots=True)
class ActuationTables:
    """
    Setpoint grid plus one fill and one empty parameter row per grid opening
    """
    grid: SetpointGrid = SetpointGrid()
    fill: FillConversionParams = DEFAULT_FILL
    empty: EmptyConversionParams = DEFAULT_EMPTY

    def __post_init__(self) -> None:
        n = len(self.grid)
        if len(self.fill.rows) != n or len(self.empty.rows) != n:
            raise ValueError(
                f'Conversion tables need one row per grid opening ({n}), got '
                f'{len(self.fill.rows)} fill and {len(self.empty.rows)} empty rows'
            )

    @classmethod
    def from_dict(cls, doc: Any, source: ConfigSource | None = None) -> 'ActuationTables':
        """
        Build from the "actuation" section: row-per-opening objects keyed by parameter letter

        Raises:
            SchemaError: On unknown keys, wrong types or inconsistent tables
        """
        source = source or ConfigSource('<actuation>')
        values = validate_section(doc, ACTUATION_FIELDS, 'actuation', source)
        grid = SetpointGrid() if values['openings'] is None else None
        try:
            if grid is None:
                grid = SetpointGrid(tuple(
                    require_number_list(values['openings'], 'actuation.openings', source)
                ))
            fill = DEFAULT_FILL if values['fill'] is None else FillConversionParams(tuple(
                FillRow(**_row(row, FILL_KEYS, grid, i, 'actuation.fill', source))
                for i, row in enumerate(values['fill'])
            ))
            empty = DEFAULT_EMPTY if values['empty'] is None else EmptyConversionParams(tuple(
                EmptyRow(**_row(row, EMPTY_KEYS, grid, i, 'actuation.empty', source))
                for i, row in enumerate(values['empty'])
            ))
            return cls(grid, fill, empty)
        except SchemaError:
            raise
        except ValueError as err:
            raise source.error(str(err), key='actuation') from err

    @classmethod
    def from_json(cls, text: str, name: str = '<actuation>') -> 'ActuationTables':
        doc, source = parse_json(text, name)
        return cls.from_dict(doc, source)

    def to_dict(self) -> dict[str, Any]:
        return {
            'openings': list(self.grid.openings),
            'fill': [
                {'opening': o, **{key: getattr(row, key) for key in FILL_KEYS}}
                for o, row in zip(self.grid.openings, self.fill.rows)
            ],
            'empty': [
                {'opening': o, **{key: getattr(row, key) for key in EMPTY_KEYS}}
                for o, row in zip(self.grid.openings, self.empty.rows)
            ],
        }

def _row(
    row: Any,
    keys: tuple[str, ...],
    grid: SetpointGrid,
    i: int,
    path: str,
    source: ConfigSource
) -> dict[str, float]:
    if json_typeof(row, '<unknown>') != 'object':
        raise source.error(f'"{path}[{i}]" must be an object', key=path.rsplit('.', 1)[-1])
    fields: FieldTable = {key: (key, ('number',), None) for key in keys}
    fields['opening'] = ('opening', ('number',), None)
    values = validate_section(row, fields, f'{path}[{i}]', source)
    if i >= len(grid) or abs(values.pop('opening') - grid.openings[i]) > 1e-9:
        raise source.error(f'"{path}[{i}].opening" does not match the setpoint grid', key='opening')
    return {key: float(val) for key, val in values.items()}

DEFAULT_TABLES = ActuationTables()
