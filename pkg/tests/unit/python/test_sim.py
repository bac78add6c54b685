"""
Unit tests for the rescaled simulation: stepper, decomposition, runner and rate report.
"""

import json

import numpy as np
import pandas as pd
import pytest

from internal.python.blowup_lab.models.config import SimConfig
from internal.python.blowup_lab.models.errors import ParameterError
from internal.python.blowup_lab.modes.system import explicit_solution, make_mode_system
from internal.python.blowup_lab.numerics.grid import GridFunction
from internal.python.blowup_lab.profile.ground_state import energy
from internal.python.blowup_lab.sim.decomposition import ModulationDecomposer, pullback
from internal.python.blowup_lab.sim.report import rate_report, type_ii_growth
from internal.python.blowup_lab.sim.runner import (
    RATE_REPORT_NAME,
    TRAJECTORY_NAME,
    RunResult,
    Simulation,
    write_outputs,
)
from internal.python.blowup_lab.sim.state import (
    STATUS_BLOWUP,
    STATUS_BUDGET,
    STATUS_NO_BLOWUP,
    RunOutcome,
    energy_allowance,
)
from internal.python.blowup_lab.sim.stepper import difference_matrices, rezone


def small_config(**overrides):
    params = {"d": 8, "ell": 1, "L": 1, "y_max": 1e3, "n": 1024}
    params.update(overrides)
    return SimConfig(**params)


@pytest.fixture(scope="module")
def sim():
    return Simulation(small_config())


@pytest.fixture(scope="module")
def initial(sim):
    return sim.init_data()


@pytest.mark.unit
class TestStepper:
    """Difference matrices, step-size control and the steady state."""

    def test_difference_matrices_on_y(self, sim):
        y = sim.grid.y
        D1, D2 = difference_matrices(sim.ctx)
        n = sim.grid.n
        # d/dx y = y and d^2/dx^2 y = y with exact odd ghosts
        np.testing.assert_allclose((D1 @ y)[:n - 2], y[:n - 2], rtol=1e-6)
        np.testing.assert_allclose((D2 @ y)[:n - 2], y[:n - 2], rtol=1e-6)
        assert D1.getrow(n - 1).nnz == 0
        assert D2.getrow(n - 1).nnz == 0

    def test_quantize(self, sim):
        stepper = sim.stepper
        assert stepper.quantize(1.0) == 1.0
        q = stepper.quantize(0.3)
        assert 0.3 * 2.0 ** -0.25 < q <= 0.3

    def test_limit(self, sim):
        stepper = sim.stepper
        assert stepper.limit(1e3, 0.0) == sim.cfg.ds_max
        assert stepper.limit(1.0, -2.0) == pytest.approx(sim.cfg.cfl * sim.grid.h / 2.0)

    def test_ground_state_is_steady(self, sim):
        result = sim.stepper.advance(np.zeros(sim.grid.n), 0.1, 0.0)
        assert np.max(np.abs(result.v)) <= 1e-14
        assert result.rejects == 0
        assert sim.stepper.next_ds(result) > result.ds


@pytest.mark.unit
class TestRezoneAndPullback:
    """Frame shifts by whole cells and spline pullback."""

    def test_rezone_of_linear_profile(self, sim):
        grid = sim.grid
        shifted = rezone(grid.y.copy(), grid.y, grid.h, 2)
        np.testing.assert_allclose(shifted, grid.y * np.exp(-2 * grid.h), rtol=1e-10)
        np.testing.assert_array_equal(rezone(grid.y, grid.y, grid.h, 0), grid.y)

    def test_pullback(self, sim):
        grid = sim.grid
        values, lam = pullback(grid.y, grid.x, 0.1)
        inside = grid.x + 0.1 <= grid.x[-1]
        np.testing.assert_allclose(values[inside], grid.y[inside] * np.exp(0.1), rtol=1e-6)
        np.testing.assert_allclose(lam[inside], grid.y[inside] * np.exp(0.1), rtol=1e-5)
        assert np.all(values[~inside] == grid.y[-1])
        assert np.all(lam[~inside] == 0.0)

    def test_simulation_rezone(self, sim, initial):
        grid = sim.grid
        values, _ = pullback(sim.pack.Q.values, grid.x, 2.5 * grid.h)
        state = initial.advanced(w=GridFunction(grid, values, 1, 0.0))
        moved = sim.rezone(state)
        assert moved.lam_gauge == pytest.approx(state.lam_gauge * np.exp(-2 * grid.h))
        assert moved.lam == pytest.approx(state.lam)
        assert moved.w.values[0] / grid.y[0] == pytest.approx(np.exp(0.5 * grid.h), rel=1e-3)
        assert sim.rezone(initial) is initial


@pytest.mark.unit
class TestDecomposition:
    """Newton projection onto the modulated family."""

    def test_initial_data_is_its_own_decomposition(self, sim, initial):
        b0 = explicit_solution(sim.system, sim.cfg.s0)
        assert initial.mu == pytest.approx(1.0)
        np.testing.assert_allclose(initial.b, b0)
        assert np.max(np.abs(initial.q.values)) <= 1e-12
        assert initial.energy > 0.0

    def test_recovers_b(self, sim):
        b = explicit_solution(sim.system, sim.cfg.s0)
        w = sim.decomposer.profile(b).Qb_localized.values
        dec = sim.decomposer.decompose(w, 1.0, 0.9 * b)
        assert dec.mu == pytest.approx(1.0, abs=1e-8)
        np.testing.assert_allclose(dec.b, b, rtol=1e-6)
        assert dec.iterations >= 1

    def test_recovers_scale(self, sim):
        b = explicit_solution(sim.system, sim.cfg.s0)
        decomposer = ModulationDecomposer(sim.ctx, sim.tks, sim.corrections, sim.phi,
                                          sim.cfg.eta, 1e-7, 25)
        profile = decomposer.profile(b).Qb_localized.values
        w, _ = pullback(profile, sim.grid.x, -np.log(1.02))
        dec = decomposer.decompose(w, 1.0, b)
        assert dec.mu == pytest.approx(1.02, rel=1e-4)
        np.testing.assert_allclose(dec.b, b, rtol=1e-3)

    def test_jacobian_scale_column(self, sim):
        decomposer = sim.decomposer
        b = explicit_solution(sim.system, sim.cfg.s0)
        profile = decomposer.profile(b)
        w = profile.Qb_localized.values
        p = np.concatenate([[0.0], b])
        _, lam, _ = decomposer._remainder(w, p)
        J = decomposer.jacobian(lam, profile)
        eps = 1e-6
        plus = decomposer._project(decomposer._remainder(w, p + [eps, 0.0])[0])
        minus = decomposer._project(decomposer._remainder(w, p - [eps, 0.0])[0])
        np.testing.assert_allclose(J[:, 0], (plus - minus) / (2 * eps), rtol=1e-4,
                                   atol=1e-6 * np.max(np.abs(J)))

    def test_jacobian_b_column(self, sim):
        decomposer = sim.decomposer
        b = explicit_solution(sim.system, sim.cfg.s0)
        profile = decomposer.profile(b)
        w = profile.Qb_localized.values
        p = np.concatenate([[0.0], b])
        _, lam, _ = decomposer._remainder(w, p)
        J = decomposer.jacobian(lam, profile)
        eps = 1e-6 * b[0]
        plus = decomposer._project(decomposer._remainder(w, p + [0.0, eps])[0])
        minus = decomposer._project(decomposer._remainder(w, p - [0.0, eps])[0])
        np.testing.assert_allclose(J[:, 1], (plus - minus) / (2 * eps), rtol=1e-3,
                                   atol=1e-5 * np.max(np.abs(J)))


@pytest.mark.unit
class TestSimulationSteps:
    """Single steps of the full-modulation flow."""

    def test_ground_state_stays_put(self, sim):
        state = sim.init_data(b0=[0.0])
        after = sim.step(state)
        Q = sim.pack.Q.values
        assert np.max(np.abs(after.w.values - Q)) <= 1e-12
        assert after.lam == pytest.approx(state.lam)
        assert after.t == pytest.approx(state.lam ** 2 * after.diagnostics["ds_taken"])

    def test_scaling_equivariance(self, sim, initial):
        lam2 = 2.0 * initial.lam_gauge
        scaled = initial.advanced(lam_gauge=lam2,
                                  energy=energy(initial.w.values, sim.grid, lam2))
        a, b = initial, scaled
        for _ in range(3):
            a, b = sim.step(a), sim.step(b)
        assert b.t == pytest.approx(4.0 * a.t, rel=1e-12)
        assert b.lam == pytest.approx(2.0 * a.lam, rel=1e-12)
        np.testing.assert_array_equal(a.b, b.b)
        assert b.energy == pytest.approx(2.0 ** (sim.cfg.d - 2) * a.energy, rel=1e-12)

    def test_energy_does_not_increase(self, sim, initial):
        state = initial
        for _ in range(3):
            new = sim.step(state)
            assert new.energy <= state.energy + energy_allowance(sim.cfg.energy_tol, state.energy)
            state = new
        assert state.lam_gauge < initial.lam_gauge

    def test_sobolev_diagnostics(self, sim, initial):
        values = sim.sobolev_diagnostics(initial, 2)
        assert len(values) == 2 and all(v >= 0.0 for v in values)
        for m_max in (0, 3):
            with pytest.raises(ParameterError):
                sim.sobolev_diagnostics(initial, m_max)

    def test_sample_columns(self, sim, initial):
        row = sim.sample(initial)
        assert list(row) == ["t", "s", "lambda", "b_1", "E", "E_2", "grad_max", "mu"]
        assert row["grad_max"] > 0.0

    def test_outside_shrinking_set_is_rejected(self, sim):
        with pytest.raises(ParameterError):
            sim.init_data(b0=[50.0 * sim.system.c[0] / sim.cfg.s0])
        with pytest.raises(ParameterError):
            sim.init_data(b0=[1e-3, 0.0])


@pytest.mark.unit
@pytest.mark.slow
def test_short_run_stops_on_the_step_budget(tmp_path):
    sim = Simulation(small_config(max_steps=6, sample_every=2))
    result = sim.run()
    assert result.outcome.status in (STATUS_BUDGET, STATUS_NO_BLOWUP)
    assert result.outcome.reason == "max_steps reached"
    assert result.final.step == 6
    assert len(result.trajectory) == 4
    assert result.report["status"] == result.outcome.status

    outputs = write_outputs(result, tmp_path)
    assert outputs[:2] == [tmp_path / TRAJECTORY_NAME, tmp_path / RATE_REPORT_NAME]
    assert json.loads((tmp_path / RATE_REPORT_NAME).read_text())["steps"] == 6
    assert list(pd.read_csv(tmp_path / TRAJECTORY_NAME).columns)[:3] == ["t", "s", "lambda"]


def synthetic_frame(system, T=100.0, c=1e-2):
    """Exact power-law trajectory: lambda = c (T - t)^p with b_1 = c_1 / s."""
    c1 = system.c[0]
    p = system.t_exponent()
    s = 20.0 * 2.0 ** (np.arange(113) / 16.0)
    lam = 0.1 * (s / 20.0) ** -c1
    gap = (lam / c) ** (1.0 / p)
    return pd.DataFrame({
        "t": T - gap,
        "s": s,
        "lambda": lam,
        "b_1": c1 / s,
        "E": np.ones_like(s),
        "E_2": np.ones_like(s),
        "grad_max": 3.0 / np.sqrt(gap),
        "mu": np.ones_like(s),
    })


@pytest.mark.unit
class TestRateReport:
    """Rates read off trajectories with known answers."""

    def test_power_law_frame(self):
        system = make_mode_system(8, 1)
        report = rate_report(synthetic_frame(system), system, STATUS_BLOWUP, "lambda reached")
        assert report["T_aitken"] == pytest.approx(100.0, rel=1e-10)
        assert report["T"] == pytest.approx(100.0, rel=1e-9)
        assert report["exponent"] == pytest.approx(system.t_exponent(), rel=1e-4)
        assert report["c"] == pytest.approx(1e-2, rel=1e-3)
        assert report["b1_s"] == pytest.approx(system.c[0], rel=1e-12)
        assert report["lambda_decades"] > 2.0
        assert report["E_2_growth"] == pytest.approx(1.0)
        assert report["status"] == STATUS_BLOWUP
        assert report["expected_exponent"] == pytest.approx(0.630602, abs=1e-6)

    def test_type_ii_indicator(self):
        system = make_mode_system(8, 1)
        frame = synthetic_frame(system)
        growth = type_ii_growth(frame, 100.0)
        assert growth["run"] == pytest.approx(1.0, rel=1e-6)
        assert growth["last_two_decades"] == pytest.approx(1.0, rel=1e-6)
        assert type_ii_growth(frame.iloc[:1], 100.0) == {"run": None, "last_two_decades": None}

    def test_outcome_bookkeeping(self):
        outcome = RunOutcome()
        outcome.finish(STATUS_NO_BLOWUP, "s_max reached")
        assert (outcome.status, outcome.reason) == (STATUS_NO_BLOWUP, "s_max reached")

    def test_energy_allowance(self):
        assert energy_allowance(1e-9, 0.25) == pytest.approx(1e-9)
        assert energy_allowance(1e-9, -40.0) == pytest.approx(4e-8)
        assert energy_allowance(1e-9, 40.0, steps=10) == pytest.approx(4e-7)
        sampled = energy_allowance(1e-9, np.array([0.5, 3.0]), 10)
        np.testing.assert_allclose(sampled, [1e-8, 3e-8])

    def test_write_outputs_without_run(self, tmp_path, initial):
        system = make_mode_system(8, 1)
        frame = synthetic_frame(system)
        report = rate_report(frame, system, STATUS_BLOWUP, "lambda reached")
        result = RunResult(RunOutcome(STATUS_BLOWUP, "lambda reached"), frame, report, initial)
        paths = write_outputs(result, tmp_path / "run")
        assert all(path.exists() for path in paths)
