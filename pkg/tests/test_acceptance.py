"""
End-to-end checks on the synthetic storm and dry weather fixtures
"""

import json
import math
import time

import numpy as np
import pandas as pd
import pytest

from udsmodellib.actuation import empty_flow, fill_flow
from udsmodellib.closedloop import dry, run_closed_loop, synthetic_storm
from udsmodellib.config.app import AppConfig, PlantConfig
from udsmodellib.control import ControlPlan, OcpConfig, receding_horizon_controller, solve_mpc, stage_cost
from udsmodellib.datafit import Dataset, fit_nlls, get_template
from udsmodellib.hydraulics import capacity_split
from udsmodellib.lm import LmControls, LmInputs, LmState, lm_step
from udsmodellib.main import run
from udsmodellib.util.logging import BufferedLogger

STORM_CONFIG = AppConfig(ocp=OcpConfig(horizon=6, max_evaluations=600))

@pytest.fixture(scope='module')
def storm_runs():
    scenario = synthetic_storm()
    return (
        run_closed_loop(scenario, 'rbc', STORM_CONFIG),
        run_closed_loop(scenario, 'mpc', STORM_CONFIG),
    )

@pytest.fixture(scope='module')
def storm_mpc_default():
    """
    MPC at the default horizon and budget over the whole storm, starting with water in the tank so
    both actuators are used
    """
    config = AppConfig(plant=PlantConfig(initial_volume=6e4))
    start = time.perf_counter()
    result = run_closed_loop(synthetic_storm(), 'mpc', config)
    return result, time.perf_counter() - start

def antithetic(x: np.ndarray, y: np.ndarray, sigma: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Every sample twice, once with +e and once with -e noise
    """
    noise = np.random.default_rng(seed).normal(0.0, sigma, x.size)
    return np.concatenate([x, x]), np.concatenate([y + noise, y - noise])

class TestRefit:
    def test_q1216_quadratic(self, tmp_path):
        x = np.random.default_rng(6).uniform(0.0, 21.26, 1000)
        x, y = antithetic(x, 0.003 * x ** 2 + 0.921 * x - 0.538, 0.3, 7)
        data = tmp_path / 'q1216.csv'
        pd.DataFrame({'q_in6': x, 'q_1216': y}).to_csv(data, index=False)
        out = tmp_path / 'fit.json'
        start = time.perf_counter()
        code = run(['fit', '--data', str(data), '--template', 'quadratic', '--target', 'q_1216',
                    '--out', str(out)], BufferedLogger())
        elapsed = time.perf_counter() - start
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc['r2'] >= 0.98
        for fitted, true in zip(doc['params'], (0.003, 0.921, -0.538)):
            assert abs(fitted - true) <= 0.1 * abs(true)
        assert elapsed < 1.0

    def test_p7_logistic(self):
        truth = np.array([0.455, 0.883, -65.998, 77.339, 0.132])
        template = get_template('logistic')
        sigma = 0.005
        x = np.linspace(0.8, 2.0, 400)
        x, y = antithetic(x, template.evaluate(truth, x.reshape(-1, 1)), sigma, 8)
        noise_sse = float(np.sum((y - template.evaluate(truth, x.reshape(-1, 1))) ** 2))
        fit = fit_nlls(Dataset(('l7',), x, y, 'p7'), template, truth * 1.1, max_iter=500)
        assert fit.converged
        assert fit.rmse <= 2.0 * sigma
        assert fit.sse <= noise_sse * (1.0 + 1e-6)

class TestStorm:
    def test_conversion_fidelity(self, storm_mpc_default):
        mpc, _ = storm_mpc_default
        conversion = mpc.conversion
        assert len(conversion.frame) == len(mpc.scenario)
        assert conversion.frame['realized_g_empt_a'].max() > 0.0
        assert conversion.r2_g_out_a is not None
        assert conversion.r2_g_out_a >= 0.95
        assert conversion.r2_g_empt_a is not None
        assert conversion.r2_g_empt_a >= 0.95

    def test_full_scenario_runtime(self, storm_mpc_default):
        mpc, elapsed = storm_mpc_default
        assert len(mpc.mpc_results) == 132
        assert all(len(res.plan) == 12 for res in mpc.mpc_results)
        assert elapsed < 600.0

    def test_mpc_not_worse_than_rbc(self, storm_runs):
        rbc, mpc = storm_runs
        assert mpc.kpi.total_cso <= rbc.kpi.total_cso
        assert mpc.kpi.q_wwtp_sur >= 0.99 * rbc.kpi.q_wwtp_sur

    def test_every_solve_improves_on_its_warm_start(self, storm_runs):
        _, mpc = storm_runs
        assert all(res.cost.j_total <= res.warm_cost.j_total for res in mpc.mpc_results)

class TestMassClosure:
    @pytest.mark.parametrize('controller', ['rbc', 'mpc'])
    def test_dry(self, controller):
        kpi = run_closed_loop(dry(), controller, AppConfig(ocp=OcpConfig(horizon=3, max_evaluations=100))).kpi
        assert kpi.closure_residual == pytest.approx(0.0, abs=1e-9)

    def test_storm(self, storm_runs):
        for result in storm_runs:
            kpi = result.kpi
            assert abs(kpi.closure_residual) <= 1e-6 * kpi.inflow

def lattice_optimum(
    state: LmState,
    forecast: list[LmInputs],
    config: OcpConfig,
    levels: int = 5
) -> float:
    """
    Cheapest plan whose controls all lie on a levels x levels lattice of the control box
    """
    controls = [
        LmControls(g_out, g_empt)
        for g_out in np.linspace(*config.g_out_bounds, levels)
        for g_empt in np.linspace(*config.g_empt_bounds, levels)
    ]
    best = math.inf

    def descend(k: int, current: LmState, cost: float) -> None:
        nonlocal best
        if k == len(forecast):
            best = min(best, cost)
            return
        for u in controls:
            nxt, out = lm_step(current, forecast[k], u, config.dt)
            cso, wwtp, smooth = stage_cost(out, current.u_prev, config)
            descend(k + 1, nxt, cost + config.w_cso * cso + config.w_wwtp * wwtp + config.w_smooth * smooth)

    descend(0, state, 0.0)
    return best

def test_solver_beats_lattice_brute_force():
    config = OcpConfig(
        horizon=4, g_out_bounds=(0.0, 8.0), g_empt_bounds=(0.0, 4.0), max_evaluations=20000,
        tolerance=1e-12
    )
    state = LmState(2e5, 0.868, LmControls())
    forecast = [LmInputs(1.0, 10.0, 2.0, 0.5)] * 4
    start = time.perf_counter()
    brute = lattice_optimum(state, forecast, config)
    result = solve_mpc(state, forecast, ControlPlan.constant(LmControls(), 4), config)
    assert time.perf_counter() - start < 60.0
    assert result.cost.j_total <= brute + 1e-9 * abs(brute)

def test_hand_values():
    assert fill_flow(5, 1.0) == pytest.approx(1.037, abs=1e-9)
    assert empty_flow(10, 0.0, 0.0, 0.0) == pytest.approx(1.71, abs=1e-9)
    assert capacity_split(8.3, 6.0) == (6.0, 8.3 - 6.0)

def test_compare_reports_are_identical(tmp_path):
    frame = synthetic_storm().to_frame().iloc[:36]
    frame.to_csv(tmp_path / 'storm.csv', index=False)
    (tmp_path / 'config.json').write_text(json.dumps({'ocp': {'horizon': 4, 'maxEvaluations': 200}}))
    reports = []
    for name in ('first', 'second'):
        code = run(['compare', '--scenario', str(tmp_path / 'storm.csv'), '--config',
                    str(tmp_path / 'config.json'), '--out', str(tmp_path / name), '-q'], BufferedLogger())
        assert code == 0
        reports.append((tmp_path / name / 'comparison.md').read_bytes())
    assert reports[0] == reports[1]
    assert reports[0].startswith(b'# KPI comparison: storm\n')

def test_mpc_step_time():
    scenario = synthetic_storm()
    state = LmState(1.5e5, 0.868, LmControls(5.0, 1.0))
    start = time.perf_counter()
    receding_horizon_controller(state, scenario.window(40, 12), None, OcpConfig())
    assert time.perf_counter() - start < 5.0
