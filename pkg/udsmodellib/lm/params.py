"""
Parameters of the left-margin (LM) pilot model
"""

from dataclasses import dataclass, fields as dc_fields
import math
from typing import Any

from ..config.utils import ConfigSource, FieldTable, dump_section, parse_json, validate_section
from ..hydraulics import TankParams

__all__ = [
    'COEFFICIENTS',
    'MODEL_FIELDS',
    'LmParams',
    'DEFAULT_PARAMS',
]

# Data-based equation coefficient names, in the order the model consumes them
COEFFICIENTS: dict[str, tuple[str, tuple[str, ...]]] = {
    'q1216': ('q1216', ('inflowSquared', 'inflow', 'intercept')),
    'q_mi2': ('qMi2', ('q1216Squared', 'qMiSquared', 'q1216', 'qMi')),
    'q_cso5_1': ('qCso51', ('q1216Squared', 'qMiSquared', 'q1216', 'qMi')),
    'l7': ('l7', ('qMi2', 'qCso5', 'q1216', 'qMi', 'intercept')),
    'p7': ('p7', ('numerator', 'offset', 'slope', 'shift', 'floor')),
}

MODEL_FIELDS: FieldTable = {
    'v_abro_max': ('abroMaxVolume', ('number',), 2e5),
    'd_abro_max': ('abroMaxDepth', ('number',), 10.0),
    'q_abro_in_max': ('abroMaxInflow', ('number',), 50.0),
    'q_abro_out_max': ('abroMaxOutflow', ('number',), 10.0),
    'la_gavia_cap': ('laGaviaCapacity', ('number',), 1.5),
    'la_gavia_biol_cap': ('laGaviaBiologicalCapacity', ('number',), 1.25),
    'sur_cap': ('surCapacity', ('number',), 6.0),
    **{name: (key, ('object',), None) for name, (key, _) in COEFFICIENTS.items()},
}

@dataclass(frozen=True, slots=True)
class LmParams:
    """
    Capacities, tank geometry and data-based equation coefficients of the LM model

    Tank geometry is a constant cross-section prism: area = v_abro_max / d_abro_max
    """
    v_abro_max: float = 2e5
    d_abro_max: float = 10.0
    q_abro_in_max: float = 50.0
    q_abro_out_max: float = 10.0
    la_gavia_cap: float = 1.5
    la_gavia_biol_cap: float = 1.25
    sur_cap: float = 6.0
    # Q_1216 = max(0, a*Q_in6^2 + b*Q_in6 + c)
    q1216: tuple[float, ...] = (0.003, 0.921, -0.538)
    # Q_mi2 = a*Q_1216^2 + b*Q_mi^2 + c*Q_1216 + d*Q_mi
    q_mi2: tuple[float, ...] = (-0.003, -0.041, 0.167, 0.874)
    # Q_CSO5.1, same regressors as Q_mi2
    q_cso5_1: tuple[float, ...] = (0.006, 0.042, 0.707, 0.155)
    # L_7 = a*Q_mi2 + b*Q_CSO5 + c*Q_1216 + d*Q_mi + e
    l7: tuple[float, ...] = (-0.254, -0.6, 0.583, 0.77, 0.868)
    # P_7 = a / (b + exp(c*L_7 + d)) + e
    p7: tuple[float, ...] = (0.455, 0.883, -65.998, 77.339, 0.132)

    def __post_init__(self) -> None:
        for name in MODEL_FIELDS:
            val = getattr(self, name)
            if name in COEFFICIENTS:
                arity = len(COEFFICIENTS[name][1])
                if len(val) != arity or not all(math.isfinite(c) for c in val):
                    raise ValueError(f'LmParams.{name} needs {arity} finite coefficients')
            elif not math.isfinite(val) or val <= 0.0:
                raise ValueError(f'LmParams.{name} must be finite and > 0, got {val!r}')

    @property
    def tank_area(self) -> float:
        """
        Plan area of the Abronigales tank (m2)
        """
        return self.v_abro_max / self.d_abro_max

    @property
    def tank(self) -> TankParams:
        """
        Abronigales tank limits for the hydraulic primitives
        """
        return TankParams(self.v_abro_max, self.q_abro_in_max, self.q_abro_out_max)

    @property
    def quiescent_l7(self) -> float:
        """
        L_7 at all-zero flows (the intercept of the level equation)
        """
        return self.l7[-1]

    @classmethod
    def from_dict(cls, doc: Any, source: ConfigSource | None = None) -> 'LmParams':
        """
        Build from the "model" section of a config document

        Raises:
            SchemaError: On unknown keys, wrong types or invalid values
        """
        source = source or ConfigSource('<model>')
        values = validate_section(doc, MODEL_FIELDS, 'model', source)
        defaults = cls()
        for name, (key, names) in COEFFICIENTS.items():
            section = values[name]
            if section is None:
                values[name] = getattr(defaults, name)
                continue
            coeffs = validate_section(
                section,
                {coeff: (coeff, ('number',), value) for coeff, value in zip(names, getattr(defaults, name))},
                f'model.{key}',
                source
            )
            values[name] = tuple(float(coeffs[coeff]) for coeff in names)
        try:
            return cls(**{
                name: (float(val) if name not in COEFFICIENTS else val)
                for name, val in values.items()
            })
        except ValueError as err:
            raise source.error(str(err)) from err

    @classmethod
    def from_json(cls, text: str, name: str = '<model>') -> 'LmParams':
        """
        Build from a JSON document holding only the model section
        """
        doc, source = parse_json(text, name)
        return cls.from_dict(doc, source)

    def to_dict(self) -> dict[str, Any]:
        """
        Inverse of from_dict
        """
        values: dict[str, Any] = {}
        for field in dc_fields(self):
            val = getattr(self, field.name)
            if field.name in COEFFICIENTS:
                val = dict(zip(COEFFICIENTS[field.name][1], val))
            values[field.name] = val
        return dump_section(values, MODEL_FIELDS)

DEFAULT_PARAMS = LmParams()

