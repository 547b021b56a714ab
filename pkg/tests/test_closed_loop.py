from dataclasses import replace
import json

import pytest

from udsmodellib.closedloop import (
    CONVERSION_COLUMNS,
    ConversionDiagnostics,
    FixedController,
    Plant,
    Scenario,
    ScenarioMetadata,
    compare_runs,
    format_delta,
    load_scenario,
    make_controller,
    parse_scenario_csv,
    run_batch,
    run_closed_loop,
    scenario_from_series,
    synthetic_storm,
    write_comparison,
    write_run
)
from udsmodellib.closedloop import dry as dry_scenario
from udsmodellib.closedloop.runner import ControlDecision
from udsmodellib.config.app import AppConfig, PlantConfig
from udsmodellib.control import OcpConfig
from udsmodellib.lm import DEFAULT_PARAMS, LmInputs, lm_simulate
from udsmodellib.util.errors import SchemaError, UsageError
from udsmodellib.util.logging import BufferedLogger

SMALL_MPC = AppConfig(ocp=OcpConfig(horizon=3, max_evaluations=150))

def short_storm(steps: int = 30) -> Scenario:
    storm = synthetic_storm()
    return Scenario('short-storm', storm.dt, storm.inputs[:steps], storm.metadata)

@pytest.fixture(scope='module')
def storm_rbc():
    return run_closed_loop(synthetic_storm(), 'rbc')

class TestScenario:
    CSV = 'time_s,q_in4,q_in5,q_in6,q_md_mi\n0,1,2,3,4\n300,1.5,2.5,3.5,4.5\n600,0,0,0,0\n'

    def test_parse(self):
        scenario = parse_scenario_csv(self.CSV, 'rain.csv')
        assert scenario.dt == 300.0
        assert len(scenario) == 3
        assert scenario.inputs[1] == LmInputs(1.5, 2.5, 3.5, 4.5)
        assert scenario.to_frame()['q_in5'].tolist() == [2.0, 2.5, 0.0]

    def test_missing_column(self):
        with pytest.raises(SchemaError, match='q_md_mi') as err:
            parse_scenario_csv('time_s,q_in4,q_in5,q_in6\n0,1,2,3\n300,1,2,3\n', 'rain.csv')
        assert err.value.line == 1

    def test_negative_flow(self):
        text = self.CSV.replace('300,1.5,2.5', '300,1.5,-2.5')
        with pytest.raises(SchemaError, match='q_in5') as err:
            parse_scenario_csv(text, 'rain.csv')
        assert (err.value.line, err.value.column) == (3, 3)

    def test_non_numeric(self):
        with pytest.raises(SchemaError, match='Non-numeric'):
            parse_scenario_csv(self.CSV.replace('3.5', 'wet'), 'rain.csv')

    @pytest.mark.parametrize('times', [('0', '300', '900'), ('0', '300', '300')])
    def test_time_steps(self, times):
        text = self.CSV.replace('\n300,', f'\n{times[1]},').replace('\n600,', f'\n{times[2]},')
        with pytest.raises(SchemaError, match='uniform') as err:
            parse_scenario_csv(text, 'rain.csv')
        assert err.value.line == 4

    def test_too_short(self):
        with pytest.raises(SchemaError, match='2 rows'):
            parse_scenario_csv('time_s,q_in4,q_in5,q_in6,q_md_mi\n0,1,2,3,4\n', 'rain.csv')

    def test_windows(self):
        scenario = parse_scenario_csv(self.CSV, 'rain.csv')
        assert scenario.window(1, 3) == [scenario.inputs[1], scenario.inputs[2], scenario.inputs[2]]
        assert scenario.window(1, 2, 'persistence') == [scenario.inputs[1]] * 2
        with pytest.raises(UsageError):
            scenario.window(0, 2, 'oracle')

    def test_load_with_sidecar(self, tmp_path):
        (tmp_path / 'event.csv').write_text(self.CSV)
        (tmp_path / 'event.json').write_text('{"precipitationMm": 27.4, "duration": "11h"}')
        scenario = load_scenario(str(tmp_path / 'event.csv'))
        assert scenario.name == 'event'
        assert scenario.metadata == ScenarioMetadata(precipitation_mm=27.4, duration='11h')

    def test_builtins(self):
        assert load_scenario('builtin://dry').name == 'dry'
        storm = load_scenario('builtin://storm')
        assert len(storm) == 132
        assert storm.inputs == synthetic_storm().inputs
        with pytest.raises(UsageError, match='drizzle'):
            load_scenario('builtin://drizzle')

    def test_from_series(self):
        scenario = scenario_from_series('s', 60.0, {col: [1.0, 2.0] for col in ('q_in4', 'q_in5', 'q_in6', 'q_md_mi')})
        assert scenario.inputs[1].total() == 8.0
        with pytest.raises(UsageError, match='q_md_mi'):
            scenario_from_series('s', 60.0, {'q_in4': [1.0], 'q_in5': [1.0], 'q_in6': [1.0]})

class TestKpis:
    def test_dry_weather_has_no_overflow(self):
        for controller in ('fixed', 'rbc'):
            kpi = run_closed_loop(dry_scenario(), controller).kpi
            assert kpi.total_cso == 0.0
            assert kpi.steps == 24
            assert kpi.closure_residual == pytest.approx(0.0, abs=1e-9)

    def test_volumes_integrate_trajectories(self, storm_rbc):
        frame, kpi = storm_rbc.trajectories, storm_rbc.kpi
        for column in ('q_cso4', 'q_cso5', 'q_cso_sur', 'q_wwtp_sur', 'q_la_gavia'):
            assert getattr(kpi, column) == pytest.approx(300.0 * frame[column].sum() / 1000.0)

    def test_mass_closure(self, storm_rbc):
        kpi = storm_rbc.kpi
        assert kpi.inflow > 0.0
        assert abs(kpi.closure_residual) <= 1e-6 * kpi.inflow

    def test_storm_overflows_under_rbc(self, storm_rbc):
        assert storm_rbc.kpi.total_cso > 0.0
        assert storm_rbc.conversion.frame.empty
        assert storm_rbc.conversion.r2_g_out_a is None

    def test_plant_matches_model(self, storm_rbc):
        initial = Plant(DEFAULT_PARAMS, AppConfig().actuation, PlantConfig(), 300.0).state
        replay = lm_simulate(initial, storm_rbc.scenario.inputs, storm_rbc.realized, 300.0)
        for out, again in zip(storm_rbc.outputs, replay):
            assert again.v_abro == pytest.approx(out.v_abro)
            assert again.total_cso == pytest.approx(out.total_cso)

    def test_fixed_runs_are_reproducible(self):
        config = AppConfig(plant=PlantConfig(perturbation=0.05, seed=3))
        first = run_closed_loop(synthetic_storm(), 'fixed', config)
        second = run_closed_loop(synthetic_storm(), 'fixed', config)
        assert first.kpi == second.kpi
        assert first.trajectories.equals(second.trajectories)

    def test_kpi_document_shape(self, storm_rbc):
        doc = storm_rbc.kpi.to_dict()
        assert doc['units'] == '10^3 m3'
        assert doc['volumes']['totalCso'] == pytest.approx(storm_rbc.kpi.total_cso)
        assert set(doc['massBalance']) == {'inflow', 'storageChange', 'corrections', 'closureResidual'}

class TestPlant:
    def test_perturbation_bounds(self):
        inputs = LmInputs(q_in5=1.0)
        decision = ControlDecision(50.0, 0.0)
        exact = Plant(DEFAULT_PARAMS, AppConfig().actuation, PlantConfig(), 300.0)
        noisy = Plant(DEFAULT_PARAMS, AppConfig().actuation, PlantConfig(perturbation=0.1, seed=7), 300.0)
        g_out = exact.realize(exact.state, inputs, decision).g_out_a
        for _ in range(20):
            assert abs(noisy.realize(noisy.state, inputs, decision).g_out_a - g_out) <= 0.1 * g_out + 1e-12

    def test_initial_state(self):
        config = PlantConfig(initial_volume=5e4, initial_l7=1.2)
        state = Plant(DEFAULT_PARAMS, AppConfig().actuation, config, 300.0).state
        assert (state.v_abro, state.l7_prev) == (5e4, 1.2)

class TestControllers:
    def test_make_controller(self):
        config = AppConfig()
        controller = make_controller('fixed', config, config.ocp)
        assert isinstance(controller, FixedController)
        assert controller.bypass_opening == 100.0
        with pytest.raises(UsageError, match='pid'):
            make_controller('pid', config, config.ocp)

    def test_dt_override_warns(self):
        logger = BufferedLogger()
        config = AppConfig(ocp=OcpConfig(dt=60.0))
        result = run_closed_loop(dry_scenario(4), 'fixed', config, logger)
        assert result.kpi.dt == 300.0
        assert '[WARNING]' in logger.text()
        assert 'overrides' in logger.text()

    def test_mpc_run(self):
        trace = BufferedLogger()
        result = run_closed_loop(short_storm(12), 'mpc', SMALL_MPC, trace=trace)
        assert len(result.mpc_results) == 12
        assert list(result.conversion.frame.columns) == CONVERSION_COLUMNS
        assert len(result.conversion.frame) == 12
        trace.flush()
        assert trace.lines[0].startswith('0,0,')
        assert sum(len(res.cost_trace) for res in result.mpc_results) == len(trace.lines)
        assert abs(result.kpi.closure_residual) <= 1e-6 * result.kpi.inflow

    def test_mpc_targets_are_the_optimized_flows(self):
        config = AppConfig(
            ocp=OcpConfig(horizon=4, max_evaluations=400, w_cso=0.0),
            plant=PlantConfig(initial_volume=2e4)
        )
        result = run_closed_loop(dry_scenario(12), 'mpc', config)
        frame = result.conversion.frame
        first = [res.plan.steps[0] for res in result.mpc_results]
        assert frame['target_g_out_a'].tolist() == [u.g_out_a for u in first]
        assert frame['target_g_empt_a'].tolist() == [u.g_empt_a for u in first]
        assert max(frame['target_g_empt_a']) > 0.0
        # Plans stay within actuator reach, so without perturbation the plant delivers them
        assert frame['realized_g_out_a'].tolist() == pytest.approx(frame['target_g_out_a'].tolist(), abs=1e-9)
        assert frame['realized_g_empt_a'].tolist() == pytest.approx(
            frame['target_g_empt_a'].tolist(), abs=1e-9
        )

    def test_unreachable_targets_lower_r2(self):
        rows = [
            {
                'step': k, 'bypass_opening': 100.0, 'target_g_out_a': 1.0 + k, 'realized_g_out_a': 1.0 + k,
                'empty_opening': 100.0, 'target_g_empt_a': target, 'realized_g_empt_a': realized,
            }
            for k, (target, realized) in enumerate([(5.0, 2.95), (4.0, 2.897), (3.0, 2.845)])
        ]
        diagnostics = ConversionDiagnostics.from_rows(rows)
        assert diagnostics.r2_g_out_a == pytest.approx(1.0)
        assert diagnostics.r2_g_empt_a < 0.0

    def test_run_batch(self):
        scenarios = [dry_scenario(6), short_storm(10)]
        sequential = run_batch(scenarios, 'rbc')
        threaded = run_batch(scenarios, 'rbc', workers=2)
        assert [run.kpi for run in sequential] == [run.kpi for run in threaded]
        with pytest.raises(UsageError):
            run_batch(scenarios, 'rbc', workers=0)

class TestComparison:
    @pytest.mark.parametrize('baseline,candidate,expected', [
        (313.09, 238.19, '-23.9%'),
        (100.0, 112.34, '+12.3%'),
        (0.0, 0.0, '0.0%'),
        (0.0, 1.0, 'n/a'),
        (100.0, 100.001, '0.0%'),
    ])
    def test_format_delta(self, baseline, candidate, expected):
        assert format_delta(baseline, candidate) == expected

    def test_self_comparison(self, storm_rbc):
        comparison = compare_runs(storm_rbc, storm_rbc)
        assert all(row.delta == '0.0%' for row in comparison.rows)
        text = comparison.markdown()
        assert text.startswith('# KPI comparison: storm\n')
        assert '| KPI | RBC (10^3 m3) | RBC (10^3 m3) | Delta |' in text
        assert f'| Total CSO (LM) | {storm_rbc.kpi.total_cso:.2f} |' in text

    def test_write_comparison(self, tmp_path, storm_rbc):
        fixed = run_closed_loop(synthetic_storm(), 'fixed')
        written = write_comparison(compare_runs(storm_rbc, fixed), str(tmp_path))
        assert (tmp_path / 'comparison.md').read_text() == compare_runs(storm_rbc, fixed).markdown()
        assert (tmp_path / 'rbc' / 'kpi.json').exists()
        assert (tmp_path / 'fixed' / 'trajectories.csv').exists()
        assert len(written) == 7

    def test_write_comparison_of_one_controller(self, tmp_path, storm_rbc):
        written = write_comparison(compare_runs(storm_rbc, storm_rbc), str(tmp_path))
        assert (tmp_path / 'baseline-rbc' / 'kpi.json').exists()
        assert (tmp_path / 'candidate-rbc' / 'kpi.json').exists()
        assert not (tmp_path / 'rbc').exists()
        assert len(set(written)) == 7

class TestReport:
    def test_write_run(self, tmp_path, storm_rbc):
        write_run(storm_rbc, str(tmp_path), trace=['0,0,1.0,1,0,false\n'])
        doc = json.loads((tmp_path / 'kpi.json').read_text())
        assert doc['controller'] == 'rbc'
        assert doc['volumes']['qCso5'] == pytest.approx(storm_rbc.kpi.q_cso5)
        assert 'conversion' not in doc
        lines = (tmp_path / 'trajectories.csv').read_text().splitlines()
        assert lines[0].startswith('step,time_s,q_in4,q_in5,q_in6,q_md_mi,bypass_opening,empty_opening')
        assert len(lines) == 133
        assert (tmp_path / 'trace.csv').read_text() == (
            'step,entry,cost,evaluations,iterations,budget_exhausted\n0,0,1.0,1,0,false\n'
        )

    def test_mpc_kpi_document(self, tmp_path):
        result = run_closed_loop(short_storm(6), 'mpc', SMALL_MPC)
        write_run(result, str(tmp_path))
        doc = json.loads((tmp_path / 'kpi.json').read_text())
        assert set(doc['conversion']) == {'r2GOutA', 'r2GEmptA'}
        assert doc['optimizer']['evaluations'] == sum(res.evaluations for res in result.mpc_results)
        assert not (tmp_path / 'trace.csv').exists()

def test_plant_config_validation():
    with pytest.raises(ValueError, match='perturbation'):
        PlantConfig(perturbation=1.5)
    with pytest.raises(ValueError, match='initialVolume'):
        AppConfig(plant=PlantConfig(initial_volume=3e5))
    assert replace(PlantConfig(), seed=4).seed == 4
