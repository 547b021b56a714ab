import math

import numpy as np
import pytest

from udsmodellib.actuation import (
    DEFAULT_TABLES,
    ActuationTables,
    EmptyContext,
    FillContext,
    SetpointGrid,
    empty_flow,
    fill_flow,
    flow_at_opening,
    grid_values,
    select_setpoint
)
from udsmodellib.util.errors import SchemaError, UsageError

ZERO = EmptyContext(0.0, 0.0, 0.0)

class TestConversionFunctions:
    def test_fill_hand_value(self):
        assert fill_flow(5, 1.0) == pytest.approx(1.037, abs=1e-9)

    def test_empty_hand_value(self):
        assert empty_flow(10, 0.0, 0.0, 0.0) == pytest.approx(1.71, abs=1e-9)

    def test_closed_actuators(self):
        assert fill_flow(0, 3.0) == 0.0
        assert empty_flow(0, 7.0, 2.0, 1.0) == 0.0

    def test_fill_above_discontinuity(self):
        expected = -2e-4 * 9.0 + 1e-2 * 3.0 + 2.18 + 0.03 * math.log(9.5 * 3.0)
        assert fill_flow(5, 3.0) == pytest.approx(expected)

    def test_fill_without_log_term(self):
        # e = 0 drops the log term
        assert fill_flow(6, 3.0) == pytest.approx(-9e-5 * 9.0 + 9e-3 * 3.0 + 6.10)

    def test_empty_depends_on_level(self):
        low = empty_flow(5, 1.0, 0.0, 0.0)
        high = empty_flow(5, 5.0, 0.0, 0.0)
        assert high > low > 0.0

    def test_invalid_arguments(self):
        with pytest.raises(UsageError, match='Grid index'):
            fill_flow(11, 1.0)
        with pytest.raises(UsageError, match='q_in5'):
            fill_flow(3, -1.0)
        with pytest.raises(UsageError, match='d_abro'):
            empty_flow(3, math.nan, 0.0, 0.0)

class TestGridValues:
    def test_fill_is_capped_at_arriving_flow(self):
        values = grid_values('fill', FillContext(1.0))
        assert values[5] == 1.0
        assert max(values) <= 1.0
        raw = grid_values('fill', FillContext(1.0), realizable=False)
        assert raw[5] == pytest.approx(1.037)

    def test_context_must_match_family(self):
        with pytest.raises(UsageError, match='FillContext'):
            grid_values('fill', ZERO)

    def test_flow_at_opening_interpolates(self):
        assert flow_at_opening('empty', 95.0, ZERO) == pytest.approx(1.685)
        assert flow_at_opening('empty', 100.0, ZERO) == pytest.approx(1.71)
        assert flow_at_opening('empty', 0.0, ZERO) == 0.0

    def test_flow_at_opening_range(self):
        with pytest.raises(UsageError, match='within'):
            flow_at_opening('fill', 101.0, FillContext(1.0))

class TestSelectSetpoint:
    def test_zero_target(self):
        assert select_setpoint(0.0, 'fill', FillContext(2.0)).opening == 0.0
        assert select_setpoint(0.0, 'empty', ZERO).opening == 0.0

    def test_interpolates_within_bracket(self):
        decision = select_setpoint(1.685, 'empty', ZERO)
        assert decision.opening == pytest.approx(95.0)
        assert (decision.lower, decision.upper) == (9, 10)
        assert decision.predicted == pytest.approx(1.685)
        assert not decision.saturated

    def test_saturates_above_grid(self):
        decision = select_setpoint(3.0, 'empty', ZERO)
        assert decision.saturated
        assert decision.opening == 100.0
        assert decision.predicted == pytest.approx(1.71)

    def test_closest_without_interpolation(self):
        decision = select_setpoint(0.5, 'empty', ZERO, interpolate=False)
        assert decision.opening == 40.0
        assert decision.predicted == pytest.approx(0.46)
        assert not decision.saturated

    def test_ties_go_to_the_lower_opening(self):
        assert select_setpoint(0.12, 'empty', ZERO, interpolate=False).opening == 0.0

    def test_fill_targets_are_realized(self):
        context = FillContext(5.0)
        for target in np.linspace(0.0, 5.0, 21):
            decision = select_setpoint(float(target), 'fill', context)
            assert not decision.saturated
            assert decision.predicted == pytest.approx(target, abs=1e-9)
            assert flow_at_opening('fill', decision.opening, context) == pytest.approx(target, abs=1e-9)

    @pytest.mark.parametrize('family,context,target,interpolate', [
        ('empty', ZERO, 1.685, True),
        ('empty', ZERO, 0.5, False),
        ('empty', ZERO, 3.0, True),
        ('empty', EmptyContext(4.0, 1.0, 0.5), 2.2, True),
        ('fill', FillContext(5.0), 2.7, True),
        ('fill', FillContext(1.0), 4.0, True),
        ('fill', FillContext(1.0), 0.45, False),
    ])
    def test_reselecting_the_predicted_flow(self, family, context, target, interpolate):
        first = select_setpoint(target, family, context, interpolate=interpolate)
        again = select_setpoint(first.predicted, family, context, interpolate=interpolate)
        assert again.opening == pytest.approx(first.opening, abs=1e-9)
        assert again.predicted == pytest.approx(first.predicted, abs=1e-9)

    def test_negative_target(self):
        with pytest.raises(UsageError, match='target'):
            select_setpoint(-0.1, 'fill', FillContext(1.0))

class TestTables:
    def test_grid(self):
        grid = SetpointGrid()
        assert len(grid) == 11
        assert grid.index_of(50.0) == 5
        assert grid.index_of(55.0) is None
        assert grid.bracket(55.0) == (5, pytest.approx(0.5))
        assert grid.bracket(100.0) == (9, 1.0)

    def test_invalid_grid(self):
        with pytest.raises(ValueError, match='start at 0'):
            SetpointGrid((10.0, 100.0))
        with pytest.raises(ValueError, match='increasing'):
            SetpointGrid((0.0, 50.0, 50.0, 100.0))

    def test_round_trip(self):
        assert ActuationTables.from_dict(DEFAULT_TABLES.to_dict()) == DEFAULT_TABLES

    def test_custom_grid(self):
        doc = DEFAULT_TABLES.to_dict()
        keep = [0, 5, 10]
        tables = ActuationTables.from_dict({
            'openings': [0, 50, 100],
            'fill': [doc['fill'][i] for i in keep],
            'empty': [doc['empty'][i] for i in keep],
        })
        assert tables.grid.openings == (0.0, 50.0, 100.0)
        assert flow_at_opening('empty', 75.0, ZERO, tables) == pytest.approx((0.56 + 1.71) / 2.0)

    def test_row_opening_mismatch(self):
        doc = DEFAULT_TABLES.to_dict()
        doc['empty'][3]['opening'] = 35
        with pytest.raises(SchemaError, match='setpoint grid'):
            ActuationTables.from_dict(doc)

    def test_row_count_mismatch(self):
        doc = DEFAULT_TABLES.to_dict()
        doc['openings'] = [0, 50, 100]
        with pytest.raises(SchemaError):
            ActuationTables.from_dict(doc)

    def test_decreasing_discontinuity(self):
        doc = DEFAULT_TABLES.to_dict()
        doc['fill'][4]['p'] = 0.5
        with pytest.raises(SchemaError, match='nondecreasing'):
            ActuationTables.from_dict(doc)

    def test_unknown_row_key(self):
        doc = DEFAULT_TABLES.to_dict()
        doc['fill'][0]['z'] = 1.0
        with pytest.raises(SchemaError, match='z'):
            ActuationTables.from_dict(doc)
