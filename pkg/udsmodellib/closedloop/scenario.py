"""
Rain scenarios: inflow time series of the LM pilot inlets plus optional event metadata
"""

from dataclasses import dataclass, field, replace
import io
import math
import os
from typing import Any, Sequence

import numpy as np
import pandas as pd

from ..config.utils import ConfigSource, FieldTable, dump_section, parse_json, validate_section
from ..lm import LmInputs
from ..util.errors import SchemaError, UsageError
from ..util.types import Logger, log_fn
from ..util.utils import file_exists, get_text, split_uri

__all__ = [
    'SCENARIO_COLUMNS',
    'FLOW_COLUMNS',
    'METADATA_FIELDS',
    'BUILTIN_SCENARIOS',
    'ScenarioMetadata',
    'Scenario',
    'parse_scenario_csv',
    'synthetic_storm',
    'dry',
    'sidecar_path',
    'load_scenario',
    'scenario_from_series',
]

SCENARIO_COLUMNS: tuple[str, ...] = ('time_s', 'q_in4', 'q_in5', 'q_in6', 'q_md_mi')
FLOW_COLUMNS: tuple[str, ...] = SCENARIO_COLUMNS[1:]

METADATA_FIELDS: FieldTable = {
    'precipitation_mm': ('precipitationMm', ('number', 'null'), None),
    'max_intensity_mm_h': ('maxIntensityMmH', ('number', 'null'), None),
    'date': ('date', ('string', 'null'), None),
    'duration': ('duration', ('string', 'null'), None),
}

@dataclass(frozen=True, slots=True)
class ScenarioMetadata:
    """
    Descriptive rain event data, never used in computations
    """
    precipitation_mm: float | None = None
    max_intensity_mm_h: float | None = None
    date: str | None = None
    duration: str | None = None

    @classmethod
    def from_dict(cls, doc: Any, source: ConfigSource | None = None) -> 'ScenarioMetadata':
        source = source or ConfigSource('<metadata>')
        return cls(**validate_section(doc, METADATA_FIELDS, 'metadata', source))

    def to_dict(self) -> dict[str, Any]:
        return dump_section({name: getattr(self, name) for name in METADATA_FIELDS}, METADATA_FIELDS)

@dataclass(frozen=True)
class Scenario:
    """
    Inflows of every sampling interval

    Args:
        name (str): Scenario name
        dt (float): Sampling interval (s)
        inputs (tuple[LmInputs, ...]): Inflows per step
        metadata (optional ScenarioMetadata default: ScenarioMetadata()): Event description
        start (optional float default: 0.0): time_s of the first step
    """
    name: str
    dt: float
    inputs: tuple[LmInputs, ...]
    metadata: ScenarioMetadata = field(default_factory=ScenarioMetadata)
    start: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.dt) or self.dt <= 0.0:
            raise UsageError(f'Scenario dt must be > 0, got {self.dt!r}')
        if len(self.inputs) == 0:
            raise UsageError('A scenario needs at least one step')

    def __len__(self) -> int:
        return len(self.inputs)

    def time(self, k: int) -> float:
        return self.start + k * self.dt

    def window(self, k: int, horizon: int, mode: str = 'perfect') -> list[LmInputs]:
        """
        Disturbance forecast for steps k .. k + horizon - 1

        'perfect' reads the scenario ahead and holds its last entry past the end, 'persistence'
        holds the inflows of step k
        """
        if mode == 'persistence':
            return [self.inputs[k]] * horizon
        if mode != 'perfect':
            raise UsageError(f'Unknown forecast mode "{mode}"')
        window = list(self.inputs[k:k + horizon])
        return window + [self.inputs[-1]] * (horizon - len(window))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'time_s': [self.time(k) for k in range(len(self))],
            **{col: [getattr(inp, col) for inp in self.inputs] for col in FLOW_COLUMNS},
        })

def parse_scenario_csv(text: str, name: str = '<scenario>') -> Scenario:
    """
    Parse a scenario CSV: header time_s,q_in4,q_in5,q_in6,q_md_mi, comma separated, '.' decimal,
    strictly increasing uniform time_s (s) and nonnegative flows (m3/s)

    Raises:
        SchemaError: Naming the missing column or the offending line
    """
    try:
        frame = pd.read_csv(io.StringIO(text), sep=',', decimal='.')
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise SchemaError(f'Invalid CSV: {err}', source=name, line=1) from err
    frame.columns = [str(col).strip() for col in frame.columns]
    for col in SCENARIO_COLUMNS:
        if col not in frame.columns:
            raise SchemaError(f'Missing column "{col}"', source=name, line=1)
    if len(frame) < 2:
        raise SchemaError('A scenario needs at least 2 rows', source=name, line=len(frame) + 1)
    values = frame[list(SCENARIO_COLUMNS)].apply(pd.to_numeric, errors='coerce').to_numpy(float)
    for row, col in zip(*np.nonzero(~np.isfinite(values))):
        col_name = SCENARIO_COLUMNS[col]
        raise SchemaError(
            f'Non-numeric value in column "{col_name}"', source=name, line=int(row) + 2,
            column=frame.columns.get_loc(col_name) + 1
        )
    for row, col in zip(*np.nonzero(values[:, 1:] < 0.0)):
        col_name = FLOW_COLUMNS[col]
        raise SchemaError(
            f'Negative flow in column "{col_name}"', source=name, line=int(row) + 2,
            column=frame.columns.get_loc(col_name) + 1
        )
    times = values[:, 0]
    steps = np.diff(times)
    dt = float(steps[0])
    bad = np.nonzero((steps <= 0.0) | (np.abs(steps - dt) > 1e-6 * max(abs(dt), 1.0)))[0]
    if bad.size:
        raise SchemaError(
            'time_s must be strictly increasing with a uniform step', source=name,
            line=int(bad[0]) + 3, column=frame.columns.get_loc('time_s') + 1
        )
    inputs = tuple(LmInputs(*(float(v) for v in row[1:])) for row in values)
    return Scenario(name, dt, inputs, start=float(times[0]))

def _triangle(k: np.ndarray, start: float, peak: float, end: float, height: float) -> np.ndarray:
    rise = np.clip((k - start) / (peak - start), 0.0, 1.0)
    fall = np.clip((end - k) / (end - peak), 0.0, 1.0)
    return height * np.minimum(rise, fall)

def synthetic_storm(seed: int = 2024, steps: int = 132, dt: float = 300.0, noise: float = 0.03) -> Scenario:
    """
    Synthetic storm: triangular inflow pulses over a dry weather base with seeded multiplicative
    noise, 11 hours at the default 5 minute step

    Args:
        seed (optional int default: 2024): Noise seed
        steps (optional int default: 132): Number of steps
        dt (optional float default: 300.0): Sampling interval (s)
        noise (optional float default: 0.03): Standard deviation of the multiplicative noise

    Returns:
        Scenario: The storm scenario
    """
    rng = np.random.default_rng(seed)
    k = np.arange(steps, dtype=float)
    flows = {
        'q_in4': 0.8 + _triangle(k, 6, 30, 90, 1.5),
        'q_in5': 0.3 + _triangle(k, 0, 30, 200, 13.7),
        'q_in6': 0.5 + _triangle(k, 4, 28, 80, 8.0),
        'q_md_mi': 1.0 + _triangle(k, 4, 34, 110, 1.5),
    }
    for col in FLOW_COLUMNS:
        flows[col] = np.maximum(flows[col] * (1.0 + noise * rng.standard_normal(steps)), 0.0)
    inputs = tuple(
        LmInputs(*(float(flows[col][i]) for col in FLOW_COLUMNS)) for i in range(steps)
    )
    metadata = ScenarioMetadata(duration=f'{steps * dt / 3600.0:g}h')
    return Scenario('storm', dt, inputs, metadata)

def dry(steps: int = 24, dt: float = 300.0) -> Scenario:
    """
    Zero inflow scenario
    """
    return Scenario('dry', dt, (LmInputs(),) * steps, ScenarioMetadata(precipitation_mm=0.0))

BUILTIN_SCENARIOS = {
    'storm': synthetic_storm,
    'dry': dry,
}

def sidecar_path(path: str) -> str:
    """
    Metadata sidecar of a scenario file: the same path with a .json extension
    """
    return (path[:-4] if path.lower().endswith('.csv') else path) + '.json'

def load_scenario(path: str, logger: Logger | None = None) -> Scenario:
    """
    Load a scenario from a CSV path/URI or a builtin://<name> scenario

    CSV scenarios are named after the file stem and the metadata sidecar is read when it exists

    Raises:
        SchemaError: If the CSV or sidecar fails validation
        UsageError: If a builtin scenario is unknown
    """
    log = log_fn(logger)
    protocol, uri = split_uri(path)
    if protocol == 'builtin':
        if uri not in BUILTIN_SCENARIOS:
            raise UsageError(
                f'Unknown builtin scenario "{uri}". Expected one of: {", ".join(BUILTIN_SCENARIOS)}'
            )
        return BUILTIN_SCENARIOS[uri]()
    scenario = parse_scenario_csv(get_text(path), path)
    scenario = replace(scenario, name=os.path.splitext(os.path.basename(uri.rstrip('/')))[0] or uri)
    meta_path = sidecar_path(path)
    if split_uri(meta_path)[0] == 'file' and file_exists(meta_path):
        doc, source = parse_json(get_text(meta_path), meta_path)
        scenario = replace(scenario, metadata=ScenarioMetadata.from_dict(doc, source))
    log(f'Loaded scenario {path}: {len(scenario)} steps of {scenario.dt:g} s', level=Logger.INFO)
    return scenario

def scenario_from_series(
    name: str,
    dt: float,
    series: dict[str, Sequence[float]],
    metadata: ScenarioMetadata | None = None
) -> Scenario:
    """
    Build a scenario from per-inlet flow lists of equal length

    Raises:
        UsageError: If an inlet is missing or the lengths differ
    """
    missing = [col for col in FLOW_COLUMNS if col not in series]
    if missing:
        raise UsageError(f'Missing inlet series: {", ".join(missing)}')
    lengths = {len(series[col]) for col in FLOW_COLUMNS}
    if len(lengths) != 1:
        raise UsageError(f'Inlet series lengths differ: {sorted(lengths)}')
    inputs = tuple(
        LmInputs(*(float(series[col][i]) for col in FLOW_COLUMNS)) for i in range(lengths.pop())
    )
    return Scenario(name, dt, inputs, metadata or ScenarioMetadata())
