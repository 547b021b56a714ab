import math

import pytest

from udsmodellib.lm import (
    DEFAULT_PARAMS,
    OUTPUT_COLUMNS,
    LmControls,
    LmInputs,
    LmParams,
    LmState,
    level_from_volume,
    lm_simulate,
    lm_step,
    pump_curve
)
from udsmodellib.util.errors import DomainError, ModelEvaluationError, SchemaError, UsageError
from udsmodellib.util.logging import BufferedLogger

DT = 300.0

def closure(inputs, outputs, v_before, dt=DT):
    """
    Inflow minus every named outlet, storage change and logged correction (m3/s)
    """
    return (
        inputs.total() - (outputs.v_abro - v_before) / dt - outputs.q_cso4 - outputs.q_cso5
        - outputs.q_cso_sur - outputs.q_wwtp_sur - outputs.q_la_gavia
        - outputs.corrections.correction
    )

class TestPumpCurve:
    def test_floor_at_quiescent_level(self):
        assert pump_curve(0.868, DEFAULT_PARAMS.p7) == pytest.approx(0.132, abs=1e-6)

    def test_upper_plateau(self):
        num, offset, *_, floor = DEFAULT_PARAMS.p7
        assert pump_curve(5.0, DEFAULT_PARAMS.p7) == pytest.approx(num / offset + floor)

    def test_huge_exponent_returns_floor(self):
        assert pump_curve(-1e6, DEFAULT_PARAMS.p7) == DEFAULT_PARAMS.p7[-1]

class TestLmStep:
    def test_dry_weather(self):
        state, out = lm_step(LmState.initial(), LmInputs(), LmControls(), DT)
        assert out.q_1216 == 0.0
        assert out.p7 == pytest.approx(0.132, abs=1e-6)
        assert out.q_la_gavia == pytest.approx(out.p7)
        assert out.total_cso == 0.0
        assert out.q_wwtp_sur == 0.0
        assert out.l7 == pytest.approx(0.868)
        assert state.v_abro == 0.0
        assert out.corrections.q1216_floor == pytest.approx(0.538)

    def test_q1216_hand_value(self):
        _, out = lm_step(LmState.initial(), LmInputs(q_in6=10.0), LmControls(), DT)
        assert out.q_1216 == pytest.approx(8.972)

    def test_sur_capacity_split(self):
        # q_mi3 = q_mi2 + q_md_mi, with q_mi = 0 q_mi2 = 0
        _, out = lm_step(LmState.initial(), LmInputs(q_md_mi=8.3), LmControls(), DT)
        assert out.q_mi3 == pytest.approx(8.3)
        assert out.q_wwtp_sur == 6.0
        assert out.q_cso_sur == pytest.approx(2.3)

    def test_la_gavia_capacity(self):
        # A high previous level puts P_7 on its upper plateau
        _, out = lm_step(LmState(0.0, 2.0), LmInputs(q_in6=13.0), LmControls(), DT)
        assert out.q_la_gavia == 1.5
        assert out.q_biol == 1.25
        assert out.q_sec == pytest.approx(0.25)
        assert out.q_out_la_gavia == 0.0
        assert out.corrections.q_out_la_gavia_floor == pytest.approx(1.0)
        assert out.corrections.la_gavia_excess > 0.0

    def test_evaluation_order_and_state(self):
        state = LmState(1000.0, 1.0, LmControls(0.5, 0.1))
        inputs = LmInputs(1.0, 3.0, 2.0, 0.5)
        controls = LmControls(1.0, 2.0)
        new, out = lm_step(state, inputs, controls, DT)
        assert out.p7 == pytest.approx(pump_curve(1.0, DEFAULT_PARAMS.p7))
        assert out.g_in_a == pytest.approx(2.0)
        assert out.q_mi == pytest.approx(1.0 + 2.0 + 1.0)
        assert out.v_abro == pytest.approx(1000.0 + DT * (2.0 - 2.0))
        assert new.v_abro == out.v_abro
        assert new.l7_prev == out.l7
        assert new.u_prev == controls
        assert out.q_cso5 == pytest.approx(out.q_cso5_1 + out.q_out_la_gavia)

    def test_pump_lags_level_by_one_step(self):
        state = LmState(1000.0, 1.0)
        _, low = lm_step(state, LmInputs(q_in4=0.5, q_in6=3.0), LmControls(), DT)
        new, high = lm_step(state, LmInputs(q_in4=6.0, q_in6=3.0), LmControls(), DT)
        assert high.l7 != pytest.approx(low.l7)
        assert high.p7 == low.p7 == pytest.approx(pump_curve(1.0, DEFAULT_PARAMS.p7))
        _, after = lm_step(new, LmInputs(q_in6=3.0), LmControls(), DT)
        assert after.p7 == pytest.approx(pump_curve(high.l7, DEFAULT_PARAMS.p7))

    def test_full_bypass_keeps_volume(self):
        state = LmState(5e4, 1.0)
        for q_in5 in (0.5, 4.0, 12.0, 1.0):
            inputs = LmInputs(1.0, q_in5, 2.0, 0.5)
            state, out = lm_step(state, inputs, LmControls(q_in5, 0.0), DT)
            assert out.g_in_a == 0.0
            assert out.v_abro == pytest.approx(5e4)
            assert out.q_cso4 == 0.0

    def test_controls_are_clamped_and_logged(self):
        logger = BufferedLogger()
        state = LmState(600.0)
        _, out = lm_step(state, LmInputs(q_in5=2.0), LmControls(5.0, 4.0), DT, logger=logger)
        assert out.g_out_a == 2.0
        assert out.g_empt_a == pytest.approx(2.0)
        assert out.corrections.g_out_a == pytest.approx(3.0)
        assert out.corrections.g_empt_a == pytest.approx(2.0)
        assert out.corrections.controls_clamped
        logger.flush()
        assert '[WARNING]' in logger.text()
        assert 'clamped' in logger.text()

    def test_negative_controls_are_clamped(self):
        _, out = lm_step(LmState(1e4), LmInputs(q_in5=1.0), LmControls(-1.0, -1.0), DT)
        assert out.g_out_a == 0.0
        assert out.g_empt_a == 0.0

    def test_outputs_nonnegative_and_capped(self):
        state = LmState.initial()
        for q in (0.0, 0.5, 3.0, 9.0, 20.0):
            inputs = LmInputs(q, q, q, q)
            state, out = lm_step(state, inputs, LmControls(q / 2.0, 1.0), DT)
            for col in OUTPUT_COLUMNS:
                if col != 'l7':
                    assert getattr(out, col) >= 0.0, col
            assert out.q_wwtp_sur <= 6.0
            assert out.q_la_gavia <= 1.5
            assert out.q_biol <= 1.25

    def test_mass_closure_every_step(self):
        state = LmState.initial()
        series = [LmInputs(1.0, k * 0.8, k * 0.6, 1.2) for k in range(30)]
        for k, inputs in enumerate(series):
            v_before = state.v_abro
            state, out = lm_step(state, inputs, LmControls(k % 5, k % 3), DT)
            assert closure(inputs, out, v_before) == pytest.approx(0.0, abs=1e-9)

    def test_mass_closure_with_overflow(self):
        state = LmState(2e5 - 100.0)
        inputs = LmInputs(1.0, 10.0, 2.0, 0.5)
        new, out = lm_step(state, inputs, LmControls(0.0, 0.0), DT)
        assert new.v_abro == 2e5
        assert out.q_cso4 > 0.0
        assert closure(inputs, out, state.v_abro) == pytest.approx(0.0, abs=1e-9)

    def test_rejects_negative_inflow(self):
        with pytest.raises(DomainError, match='q_in6'):
            lm_step(LmState.initial(), LmInputs(q_in6=-1.0), LmControls(), DT)

    def test_rejects_bad_state(self):
        with pytest.raises(DomainError):
            lm_step(LmState(-5.0), LmInputs(), LmControls(), DT)
        with pytest.raises(DomainError, match='l7_prev'):
            lm_step(LmState(0.0, math.nan), LmInputs(), LmControls(), DT)

    def test_non_finite_equation(self):
        params = LmParams(q1216=(1e300, 1e300, 0.0))
        with pytest.raises(ModelEvaluationError, match='Q_1216'):
            lm_step(LmState.initial(params), LmInputs(q_in6=1e10), LmControls(), DT, params)

class TestLmSimulate:
    def test_matches_step_loop(self):
        inputs = [LmInputs(1.0, 2.0 + k, 1.0, 0.5) for k in range(5)]
        controls = [LmControls(1.0, 0.0)] * 5
        outputs = lm_simulate(LmState.initial(), inputs, controls, DT)
        state = LmState.initial()
        for step_inputs, step_controls, out in zip(inputs, controls, outputs):
            state, expected = lm_step(state, step_inputs, step_controls, DT)
            assert out == expected

    def test_length_mismatch(self):
        with pytest.raises(UsageError, match='lengths differ'):
            lm_simulate(LmState.initial(), [LmInputs()] * 2, [LmControls()], DT)

    def test_empty(self):
        with pytest.raises(UsageError):
            lm_simulate(LmState.initial(), [], [], DT)

class TestLmParams:
    def test_level_from_volume(self):
        assert level_from_volume(2e5) == pytest.approx(10.0)
        assert DEFAULT_PARAMS.tank_area == pytest.approx(2e4)

    def test_dict_round_trip(self):
        assert LmParams.from_dict(DEFAULT_PARAMS.to_dict()) == DEFAULT_PARAMS

    def test_partial_coefficients(self):
        params = LmParams.from_json('{"q1216": {"intercept": 0.0}, "surCapacity": 5}')
        assert params.q1216 == (0.003, 0.921, 0.0)
        assert params.sur_cap == 5.0

    def test_unknown_key_is_located(self):
        with pytest.raises(SchemaError) as err:
            LmParams.from_json('{\n  "surCapacity": 6,\n  "bogus": 1\n}', 'model.json')
        assert err.value.line == 3
        assert err.value.column == 3
        assert 'bogus' in err.value.diagnostic()

    def test_invalid_capacity(self):
        with pytest.raises(SchemaError, match='sur_cap'):
            LmParams.from_json('{"surCapacity": 0}')
