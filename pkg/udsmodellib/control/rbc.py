"""
Rule-based control (RBC) baseline of the Abronigales tank actuators
"""

from dataclasses import dataclass
import enum
import operator
from typing import Any

from ..actuation import (
    DEFAULT_TABLES,
    ActuationTables,
    EmptyContext,
    FillContext,
    flow_at_opening,
    select_setpoint
)
from ..config.utils import ConfigSource, FieldTable, json_typeof, validate_section
from ..lm import DEFAULT_PARAMS, OUTPUT_COLUMNS, LmInputs, LmOutputs, LmParams, LmState, level_from_volume

__all__ = [
    'TRACK',
    'VARIABLES',
    'RBC_FIELDS',
    'DEFAULT_RULES',
    'Comparison',
    'Observation',
    'RbcRule',
    'RbcRuleSet',
    'rbc_step',
]

# Opening value of the rule that tracks the spare Sur WWTP capacity with the emptying flow
TRACK = 'track'

class Comparison(enum.Enum):
    """
    Comparison operators of rule conditions
    """
    lt = ('<', operator.lt)
    le = ('<=', operator.le)
    gt = ('>', operator.gt)
    ge = ('>=', operator.ge)

    @property
    def symbol(self) -> str:
        return self.value[0]

    def __call__(self, lhs: float, rhs: float) -> bool:
        return self.value[1](lhs, rhs)

    @classmethod
    def parse(cls, symbol: str) -> 'Comparison':
        for member in cls:
            if member.symbol == symbol:
                return member
        raise ValueError(f'Invalid comparison "{symbol}", expected one of <, <=, >, >=')

@dataclass(frozen=True, slots=True)
class Observation:
    """
    What the RBC sees at the start of a step

    Args:
        state (LmState): Current plant state
        inputs (LmInputs): Current inflows
        previous (LmOutputs | None): Outputs of the previous step, None on the first step
    """
    state: LmState
    inputs: LmInputs
    previous: LmOutputs | None = None

    def value(self, variable: str, params: LmParams = DEFAULT_PARAMS) -> float:
        """
        Look up an observed variable: an inflow, v_abro, d_abro or a previous-step output (0 before
        the first step)
        """
        if variable in ('q_in4', 'q_in5', 'q_in6', 'q_md_mi'):
            return getattr(self.inputs, variable)
        if variable == 'v_abro':
            return self.state.v_abro
        if variable == 'd_abro':
            return level_from_volume(self.state.v_abro, params)
        if variable in OUTPUT_COLUMNS:
            return getattr(self.previous, variable) if self.previous is not None else 0.0
        raise ValueError(f'Unknown observed variable "{variable}"')

VARIABLES: tuple[str, ...] = ('q_in4', 'q_in5', 'q_in6', 'q_md_mi', 'd_abro') + OUTPUT_COLUMNS

@dataclass(frozen=True, slots=True)
class RbcRule:
    """
    If `variable op threshold` holds, set the actuator to `opening`. A rule without a variable
    always fires

    Args:
        opening (float | str): Grid opening (%) or 'track' for the emptying actuator
        variable (optional str | None default: None): Observed variable
        op (optional Comparison default: Comparison.le): Comparison operator
        threshold (optional float default: 0.0): Threshold value
    """
    opening: float | str
    variable: str | None = None
    op: Comparison = Comparison.le
    threshold: float = 0.0

    def fires(self, observation: Observation, params: LmParams = DEFAULT_PARAMS) -> bool:
        if self.variable is None:
            return True
        return self.op(observation.value(self.variable, params), self.threshold)

    def to_dict(self) -> dict[str, Any]:
        res: dict[str, Any] = {'opening': self.opening}
        if self.variable is not None:
            res['when'] = {
                'variable': self.variable, 'op': self.op.symbol, 'threshold': self.threshold
            }
        return res

@dataclass(frozen=True, slots=True)
class RbcRuleSet:
    """
    Ordered rules per actuator, the first rule that fires decides and the last rule of each list
    must be unconditional
    """
    bypass: tuple[RbcRule, ...]
    empty: tuple[RbcRule, ...]

    def validate(self, tables: ActuationTables = DEFAULT_TABLES) -> None:
        """
        Check the rule set is total and its openings are on the grid

        Raises:
            ValueError: Naming the first problem found
        """
        for actuator, rules in (('bypass', self.bypass), ('empty', self.empty)):
            if not rules or rules[-1].variable is not None:
                raise ValueError(f'The last {actuator} rule must be unconditional')
            for i, rule in enumerate(rules):
                if rule.variable is not None and rule.variable not in VARIABLES:
                    raise ValueError(f'{actuator} rule {i}: unknown variable "{rule.variable}"')
                if rule.opening == TRACK:
                    if actuator != 'empty':
                        raise ValueError(f'{actuator} rule {i}: only empty rules can track')
                elif isinstance(rule.opening, str) or tables.grid.index_of(rule.opening) is None:
                    raise ValueError(
                        f'{actuator} rule {i}: opening {rule.opening!r} is not on the setpoint grid'
                    )

    @classmethod
    def from_dict(
        cls,
        doc: Any,
        source: ConfigSource | None = None,
        tables: ActuationTables = DEFAULT_TABLES
    ) -> 'RbcRuleSet':
        """
        Build from the "rbc" section: {"bypass": [rule...], "empty": [rule...]} with rules of the
        form {"when": {"variable": ..., "op": ..., "threshold": ...}, "opening": ...}
        """
        source = source or ConfigSource('<rbc>')
        values = validate_section(doc, RBC_FIELDS, 'rbc', source)
        lists: dict[str, tuple[RbcRule, ...]] = {}
        for actuator in ('bypass', 'empty'):
            if values[actuator] is None:
                lists[actuator] = getattr(DEFAULT_RULES, actuator)
                continue
            lists[actuator] = tuple(
                _rule(item, f'rbc.{actuator}[{i}]', source) for i, item in enumerate(values[actuator])
            )
        rules = cls(lists['bypass'], lists['empty'])
        try:
            rules.validate(tables)
        except ValueError as err:
            raise source.error(str(err), key='rbc') from err
        return rules

    def to_dict(self) -> dict[str, Any]:
        return {
            'bypass': [rule.to_dict() for rule in self.bypass],
            'empty': [rule.to_dict() for rule in self.empty],
        }

RBC_FIELDS: FieldTable = {
    'bypass': ('bypass', ('array', 'null'), None),
    'empty': ('empty', ('array', 'null'), None),
}

_RULE_FIELDS: FieldTable = {
    'opening': ('opening', ('number', 'string'), None),
    'when': ('when', ('object', 'null'), None),
}

_WHEN_FIELDS: FieldTable = {
    'variable': ('variable', ('string',), None),
    'op': ('op', ('string',), '<='),
    'threshold': ('threshold', ('number',), None),
}

def _rule(item: Any, path: str, source: ConfigSource) -> RbcRule:
    values = validate_section(item, _RULE_FIELDS, path, source)
    opening = values['opening']
    if json_typeof(opening) == 'number':
        opening = float(opening)
    if values['when'] is None:
        return RbcRule(opening)
    when = validate_section(values['when'], _WHEN_FIELDS, f'{path}.when', source)
    try:
        op = Comparison.parse(when['op'])
    except ValueError as err:
        raise source.error(str(err), key='op') from err
    return RbcRule(opening, when['variable'], op, float(when['threshold']))

DEFAULT_RULES = RbcRuleSet(
    bypass=(
        RbcRule(100.0, 'q_in5', Comparison.le, 2.0),
        RbcRule(50.0, 'q_in5', Comparison.le, 4.0),
        RbcRule(0.0),
    ),
    empty=(
        RbcRule(0.0, 'v_abro', Comparison.le, 0.0),
        RbcRule(TRACK, 'q_in5', Comparison.lt, 1.0),
        RbcRule(0.0),
    ),
)

def _first(rules: tuple[RbcRule, ...], observation: Observation, params: LmParams) -> RbcRule:
    for rule in rules:
        if rule.fires(observation, params):
            return rule
    # validate() guarantees an unconditional last rule
    return rules[-1]

def rbc_step(
    observation: Observation,
    rules: RbcRuleSet = DEFAULT_RULES,
    tables: ActuationTables = DEFAULT_TABLES,
    params: LmParams = DEFAULT_PARAMS
) -> tuple[float, float]:
    """
    Openings (%) of the bypass and empty actuators for an observation

    A tracking empty rule picks the grid opening whose emptying flow is closest to
    min(q_out_max, spare Sur capacity), where the spare capacity is estimated from the previous
    step's q_mi3

    Args:
        observation (Observation): Current state, inflows and previous outputs
        rules (optional RbcRuleSet default: DEFAULT_RULES): The rule set
        tables (optional ActuationTables default: DEFAULT_TABLES): Conversion tables
        params (optional LmParams default: DEFAULT_PARAMS): Model parameters

    Returns:
        tuple[float, float]: (bypass opening, empty opening)
    """
    bypass = _first(rules.bypass, observation, params).opening
    empty = _first(rules.empty, observation, params).opening
    if empty == TRACK:
        spare = max(0.0, params.sur_cap - observation.value('q_mi3', params))
        target = min(params.q_abro_out_max, spare)
        g_out_a = flow_at_opening('fill', bypass, FillContext(observation.inputs.q_in5), tables)
        context = EmptyContext(
            level_from_volume(observation.state.v_abro, params), g_out_a, observation.inputs.q_in4
        )
        empty = select_setpoint(target, 'empty', context, tables, interpolate=False).opening
    return float(bypass), float(empty)

