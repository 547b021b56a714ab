"""
Application config: every tunable of the model, actuation, controllers, plant and outputs
"""

from dataclasses import dataclass
import hashlib
import json
import math
from typing import Any

from ..actuation import DEFAULT_TABLES, ActuationTables
from ..control import DEFAULT_RULES, OcpConfig, RbcRuleSet
from ..lm import DEFAULT_PARAMS, LmParams
from ..util.errors import SchemaError
from ..util.types import Logger, log_fn
from ..util.utils import get_text
from .utils import ConfigSource, FieldTable, dump_section, parse_json, validate_section

FIXED_FIELDS: FieldTable = {
    'bypass_opening': ('bypassOpening', ('number',), 100.0),
    'empty_opening': ('emptyOpening', ('number',), 0.0),
}

PLANT_FIELDS: FieldTable = {
    'perturbation': ('perturbation', ('number',), 0.0),
    'seed': ('seed', ('number',), 0),
    'initial_volume': ('initialVolume', ('number',), 0.0),
    'initial_l7': ('initialL7', ('number', 'null'), None),
}

OUTPUT_FIELDS: FieldTable = {
    'directory': ('directory', ('string',), 'runs'),
}

APP_FIELDS: FieldTable = {
    'model': ('model', ('object', 'null'), None),
    'actuation': ('actuation', ('object', 'null'), None),
    'ocp': ('ocp', ('object', 'null'), None),
    'rbc': ('rbc', ('object', 'null'), None),
    'fixed': ('fixed', ('object', 'null'), None),
    'plant': ('plant', ('object', 'null'), None),
    'output': ('output', ('object', 'null'), None),
}

@dataclass(frozen=True, slots=True)
class FixedConfig:
    """
    Openings (%) held by the fixed controller
    """
    bypass_opening: float = 100.0
    empty_opening: float = 0.0

    def __post_init__(self) -> None:
        for name in ('bypass_opening', 'empty_opening'):
            if not 0.0 <= getattr(self, name) <= 100.0:
                raise ValueError(f'{name} must be within [0, 100], got {getattr(self, name)!r}')

@dataclass(frozen=True, slots=True)
class PlantConfig:
    """
    Closed-loop plant settings

    Args:
        perturbation (optional float default: 0.0): Amplitude p of the multiplicative actuator flow
        error 1 + p*U(-1, 1), 0 disables it
        seed (optional int default: 0): Seed of the perturbation generator
        initial_volume (optional float default: 0.0): Initial Abronigales volume (m3)
        initial_l7 (optional float | None default: None): Initial L_7, the model's all-zero-flow
        value if None
    """
    perturbation: float = 0.0
    seed: int = 0
    initial_volume: float = 0.0
    initial_l7: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.perturbation < 1.0:
            raise ValueError(f'perturbation must be within [0, 1), got {self.perturbation!r}')
        if self.initial_volume < 0.0:
            raise ValueError(f'initial_volume must be >= 0, got {self.initial_volume!r}')
        if self.initial_l7 is not None and not math.isfinite(self.initial_l7):
            raise ValueError('initial_l7 must be finite')

@dataclass(frozen=True, slots=True)
class OutputConfig:
    directory: str = 'runs'

@dataclass(frozen=True, slots=True)
class AppConfig: #pylint: disable=too-many-instance-attributes
    """
    Complete application config, every section defaults to the embedded values
    """
    model: LmParams = DEFAULT_PARAMS
    actuation: ActuationTables = DEFAULT_TABLES
    ocp: OcpConfig = OcpConfig()
    rbc: RbcRuleSet = DEFAULT_RULES
    fixed: FixedConfig = FixedConfig()
    plant: PlantConfig = PlantConfig()
    output: OutputConfig = OutputConfig()

    def __post_init__(self) -> None:
        if self.plant.initial_volume > self.model.v_abro_max:
            raise ValueError(
                f'plant.initialVolume {self.plant.initial_volume!r} exceeds the tank volume '
                f'{self.model.v_abro_max!r}'
            )

    @classmethod
    def from_dict(cls, doc: Any, source: ConfigSource | None = None) -> 'AppConfig':
        """
        Build from a parsed config document

        Raises:
            SchemaError: On unknown keys, wrong types or invalid values, located in the source text
        """
        source = source or ConfigSource('<config>')
        sections = validate_section(doc, APP_FIELDS, 'config', source)
        kwargs: dict[str, Any] = {}
        if sections['model'] is not None:
            kwargs['model'] = LmParams.from_dict(sections['model'], source)
        if sections['actuation'] is not None:
            kwargs['actuation'] = ActuationTables.from_dict(sections['actuation'], source)
        if sections['ocp'] is not None:
            kwargs['ocp'] = OcpConfig.from_dict(sections['ocp'], source)
        if sections['rbc'] is not None:
            kwargs['rbc'] = RbcRuleSet.from_dict(
                sections['rbc'], source, kwargs.get('actuation', DEFAULT_TABLES)
            )
        simple: list[tuple[str, type, FieldTable]] = [
            ('fixed', FixedConfig, FIXED_FIELDS),
            ('plant', PlantConfig, PLANT_FIELDS),
            ('output', OutputConfig, OUTPUT_FIELDS),
        ]
        try:
            for name, section_t, fields in simple:
                if sections[name] is not None:
                    values = validate_section(sections[name], fields, name, source)
                    if name == 'plant':
                        if int(values['seed']) != values['seed']:
                            raise source.error('"plant.seed" must be an integer', key='seed')
                        values['seed'] = int(values['seed'])
                    kwargs[name] = section_t(**values)
            return cls(**kwargs)
        except SchemaError:
            raise
        except ValueError as err:
            raise source.error(str(err)) from err

    def to_dict(self) -> dict[str, Any]:
        """
        Full config document, the inverse of from_dict
        """
        return {
            'model': self.model.to_dict(),
            'actuation': self.actuation.to_dict(),
            'ocp': self.ocp.to_dict(),
            'rbc': self.rbc.to_dict(),
            'fixed': dump_section(
                {name: getattr(self.fixed, name) for name in FIXED_FIELDS}, FIXED_FIELDS
            ),
            'plant': dump_section(
                {name: getattr(self.plant, name) for name in PLANT_FIELDS}, PLANT_FIELDS
            ),
            'output': dump_section(
                {name: getattr(self.output, name) for name in OUTPUT_FIELDS}, OUTPUT_FIELDS
            ),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

def parse_config(text: str, name: str = '<config>') -> AppConfig:
    """
    Parse and validate a JSON config document
    """
    doc, source = parse_json(text, name)
    return AppConfig.from_dict(doc, source)

def load_config(path: str | None, logger: Logger | None = None) -> AppConfig:
    """
    Load a config from a local path or URI, the embedded defaults if path is None

    Args:
        path (str | None): Config location (file path, file://, http(s):// or s3://)
        logger (optional Logger | None default: None): Receives an info line naming the source

    Returns:
        AppConfig: The validated config
    """
    if path is None:
        return AppConfig()
    log_fn(logger)(f'Loading config from {path}', level=Logger.INFO)
    return parse_config(get_text(path), path)

def table_checksum(model: LmParams = DEFAULT_PARAMS, actuation: ActuationTables = DEFAULT_TABLES) -> str:
    """
    SHA-256 hex digest of the canonical JSON of the model coefficients and conversion tables
    """
    canonical = json.dumps(
        {'model': model.to_dict(), 'actuation': actuation.to_dict()},
        sort_keys=True,
        separators=(',', ':')
    )
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
