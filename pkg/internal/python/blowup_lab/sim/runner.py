"""
Dynamically rescaled simulation of the corotational flow.

A Simulation owns everything that depends only on the config: the ground
state, kernel iterates, corrections, Phi_M, the stepper and the
decomposer. States are immutable snapshots advanced by step().
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from internal.python.blowup_lab.linop.kernel import generate_Tk
from internal.python.blowup_lab.linop.operators import apply_Lk, make_context
from internal.python.blowup_lab.linop.orthogonality import build_PhiM
from internal.python.blowup_lab.models.config import GaugeMode, SimConfig
from internal.python.blowup_lab.models.errors import FileError, ParameterError, SolverFault
from internal.python.blowup_lab.modes.dynamics import shrinking_set_check
from internal.python.blowup_lab.modes.system import explicit_solution, make_mode_system
from internal.python.blowup_lab.numerics.grid import GridFunction, dx, make_grid, weighted_norm_sq
from internal.python.blowup_lab.profile.ground_state import energy, solve_Q
from internal.python.blowup_lab.qb.corrections import build_Sk
from internal.python.blowup_lab.sim.decomposition import DecompositionResult, ModulationDecomposer
from internal.python.blowup_lab.sim.report import rate_report
from internal.python.blowup_lab.sim.state import (
    STATUS_BLOWUP,
    STATUS_BUDGET,
    STATUS_NO_BLOWUP,
    RunOutcome,
    SimState,
    energy_allowance,
)
from internal.python.blowup_lab.sim.stepper import LinearlyImplicitStepper, rezone
from internal.python.common.logger import default_logger

logger = default_logger.child("sim")

TRAJECTORY_NAME = "trajectory.csv"
RATE_REPORT_NAME = "rate_report.json"
FRAMES_DIR = "frames"
FLOAT_FORMAT = "%.17g"


@dataclass
class RunResult:
    """Outcome, sampled trajectory and rate report of one run."""
    outcome: RunOutcome
    trajectory: pd.DataFrame
    report: Dict[str, Any]
    final: SimState
    outputs: List[Path] = field(default_factory=list)


class Simulation:
    """Renormalized flow for one SimConfig."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        grid = make_grid(cfg.d, cfg.y_min, cfg.y_max, cfg.n)
        self.pack = solve_Q(grid)
        self.ctx = make_context(self.pack)
        self.tks = generate_Tk(self.ctx, cfg.L)
        self.corrections = build_Sk(self.ctx, self.tks, cfg.L)
        self.phi = build_PhiM(self.ctx, self.tks, cfg.M, cfg.L)
        self.system = make_mode_system(cfg.d, cfg.ell, cfg.L)
        self.stepper = LinearlyImplicitStepper(self.ctx, cfg.solver_tol, cfg.max_rejects,
                                               cfg.ds_max, cfg.cfl)
        self.decomposer = ModulationDecomposer(self.ctx, self.tks, self.corrections, self.phi,
                                               cfg.eta, cfg.newton_tol, cfg.newton_maxiter)
        logger.info("simulation ready", {"d": cfg.d, "ell": cfg.ell, "L": cfg.L, "n": cfg.n,
                                         "gauge": cfg.gauge_mode.value})

    @property
    def grid(self):
        return self.ctx.grid

    @property
    def full_modulation(self) -> bool:
        return self.cfg.gauge_mode == GaugeMode.FULL_MODULATION

    def default_perturbation(self) -> np.ndarray:
        """Gaussian bump in log y, zero when the configured amplitude is."""
        cfg = self.cfg
        x = self.grid.x
        return cfg.q0_amplitude * np.exp(-0.5 * ((x - np.log(cfg.q0_center)) / cfg.q0_width) ** 2)

    def init_data(self, b0: Optional[Sequence[float]] = None,
                  q0: Optional[np.ndarray] = None) -> SimState:
        """
        w = Q~_{b0} + q0 at s = s0 with lambda = lambda0.

        b0 defaults to the explicit solution at s0. A nonzero b0 must lie in
        the shrinking set; b0 = 0 gives the ground state itself.
        """
        cfg = self.cfg
        b = explicit_solution(self.system, cfg.s0) if b0 is None else np.asarray(b0, dtype=float)
        if b.size != cfg.L:
            raise ParameterError("b0 must have L entries", size=b.size, L=cfg.L)
        if np.any(b):
            check = shrinking_set_check(self.system, np.array([cfg.s0]), b[None, :], cfg.eta)
            if not check["inside"]:
                raise ParameterError("initial b lies outside the shrinking set",
                                     b=b.tolist(), s0=cfg.s0, **check)
        perturbation = self.default_perturbation() if q0 is None else np.asarray(q0, dtype=float)
        profile = self.decomposer.profile(b)
        values = profile.Qb_localized.values + perturbation
        w = GridFunction(self.grid, values, 1, 0.0)
        dec = self.decomposer.decompose(values, 1.0, b)
        state = SimState(w=w, q=dec.q, lam_gauge=cfg.lambda0, mu=dec.mu, b=dec.b, s=cfg.s0,
                         s_gauge=cfg.s0, t=0.0, ds=cfg.ds0,
                         energy=energy(values, self.grid, cfg.lambda0))
        if not (np.isfinite(state.energy) and state.energy > 0.0):
            raise ParameterError("initial energy must be finite and positive", energy=state.energy)
        logger.info("initial data", {"b": b.tolist(), "mu": dec.mu, "energy": state.energy})
        return state

    def gauge_rate(self, state: SimState) -> float:
        return -state.b1 if self.full_modulation else 0.0

    def step(self, state: SimState, decompose: Optional[bool] = None) -> SimState:
        """
        One accepted step in the gauge frame, then the gauge update, the
        energy check and (by default in full_modulation) a re-decomposition.
        """
        cfg = self.cfg
        Q = self.pack.Q.values
        a = self.gauge_rate(state)
        v_old = state.w.values - Q
        result = self.stepper.advance(v_old, state.ds, a)
        ds = result.ds
        values = Q + result.v

        lam_g = state.lam_gauge
        if a == 0.0:
            dt = lam_g ** 2 * ds
        else:
            dt = lam_g ** 2 * np.expm1(2.0 * a * ds) / (2.0 * a)
        lam_new = lam_g * np.exp(a * ds)

        w = GridFunction(self.grid, values, 1, 0.0)
        lam_w = dx(w)
        rate = GridFunction(self.grid, (result.v - v_old) / ds - a * lam_w, 1, 0.0)
        dissipation = 2.0 * lam_g ** (cfg.d - 2) * ds * weighted_norm_sq(rate, np.ones(self.grid.n))
        e_new = energy(values, self.grid, lam_new)
        allowance = float(energy_allowance(cfg.energy_tol, state.energy))
        if e_new > state.energy + allowance:
            raise SolverFault("energy increased on an accepted step", before=state.energy,
                              after=e_new, step=state.step + 1)

        new = state.advanced(
            w=w, lam_gauge=lam_new, s_gauge=state.s_gauge + ds, s=state.s + ds / state.mu ** 2,
            t=state.t + dt, step=state.step + 1, ds=self.stepper.next_ds(result), energy=e_new,
            diagnostics={"error": result.error, "rejects": result.rejects, "ds_taken": ds,
                         "energy_drop": state.energy - e_new, "dissipation": dissipation},
        )
        if not self.full_modulation:
            new = self.rezone(new)
        if decompose is None:
            decompose = self.full_modulation
        if decompose:
            new = self.decompose(new)
        return new

    def rezone(self, state: SimState) -> SimState:
        """Shift the frozen frame by whole cells once the origin slope exceeds e^h."""
        grid = self.grid
        slope = state.w.values[0] / grid.y[0]
        if slope <= np.exp(grid.h):
            return state
        m = int(np.floor(np.log(slope) / grid.h))
        values = rezone(state.w.values, grid.y, grid.h, m)
        shift = np.exp(-m * grid.h)
        logger.debug("rezone", {"cells": m, "step": state.step})
        return state.advanced(w=GridFunction(grid, values, 1, 0.0),
                              lam_gauge=state.lam_gauge * shift, mu=state.mu / shift)

    def decompose(self, state: SimState) -> SimState:
        dec: DecompositionResult = self.decomposer.decompose(state.w.values, state.mu, state.b)
        diagnostics = dict(state.diagnostics)
        diagnostics["newton_iterations"] = dec.iterations
        diagnostics["orthogonality_residual"] = dec.residual
        return state.advanced(mu=dec.mu, b=dec.b, q=dec.q, diagnostics=diagnostics)

    def sobolev_diagnostics(self, state: SimState, m_max: int = 1) -> List[float]:
        """E_{2m} = int |L^m q|^2 for m = 1..m_max."""
        if not 1 <= m_max <= 2:
            raise ParameterError("m_max must be 1 or 2", m_max=m_max)
        ones = np.ones(self.grid.n)
        return [weighted_norm_sq(apply_Lk(self.ctx, state.q, m), ones)
                for m in range(1, m_max + 1)]

    def gradient_max(self, state: SimState) -> float:
        """max |u_r| = max |w_y| / lambda_g."""
        return float(np.max(np.abs(dx(state.w) / self.grid.y))) / state.lam_gauge

    def sample(self, state: SimState) -> Dict[str, float]:
        row = {"t": state.t, "s": state.s, "lambda": state.lam}
        for k, value in enumerate(state.b, start=1):
            row[f"b_{k}"] = float(value)
        row["E"] = state.energy
        row["E_2"] = self.sobolev_diagnostics(state, 1)[0]
        row["grad_max"] = self.gradient_max(state)
        row["mu"] = state.mu
        return row

    def _frame(self, state: SimState, frames_dir: Path) -> Path:
        path = frames_dir / f"frame_{state.step:06d}.csv"
        pd.DataFrame({"y": self.grid.y, "w": state.w.values, "q": state.q.values}).to_csv(
            path, index=False, float_format=FLOAT_FORMAT)
        return path

    def _stop(self, state: SimState, started: float, outcome: RunOutcome, lam0: float) -> bool:
        cfg = self.cfg
        if state.lam <= cfg.lambda_min:
            outcome.finish(STATUS_BLOWUP, f"lambda reached {cfg.lambda_min:g}")
            return True
        reason = None
        if state.s_gauge >= cfg.s_max:
            reason = "s_max reached"
        elif state.step >= cfg.max_steps:
            reason = "max_steps reached"
        elif time.monotonic() - started >= cfg.wall_clock:
            reason = "wall clock exhausted"
        if reason is None:
            return False
        bounded = state.b1 <= 0.0 or state.lam >= lam0
        outcome.finish(STATUS_NO_BLOWUP if bounded else STATUS_BUDGET, reason)
        return True

    def run(self, out_dir: Optional[Path] = None, state: Optional[SimState] = None) -> RunResult:
        """Integrate until lambda <= lambda_min or the budget runs out."""
        cfg = self.cfg
        state = self.init_data() if state is None else state
        frames_dir = None
        outputs: List[Path] = []
        if out_dir is not None and cfg.frame_every > 0:
            frames_dir = Path(out_dir) / FRAMES_DIR
            frames_dir.mkdir(parents=True, exist_ok=True)

        started = time.monotonic()
        lam0 = state.lam
        outcome = RunOutcome()
        rows = [self.sample(state)]
        rejects = 0
        while not self._stop(state, started, outcome, lam0):
            sample_now = (state.step + 1) % cfg.sample_every == 0
            frame_now = frames_dir is not None and (state.step + 1) % cfg.frame_every == 0
            decompose = self.full_modulation or sample_now or frame_now
            state = self.step(state, decompose=decompose)
            rejects += state.diagnostics.get("rejects", 0)
            if sample_now or state.lam <= cfg.lambda_min:
                rows.append(self.sample(state))
                logger.debug("sample", rows[-1])
            if frame_now:
                outputs.append(self._frame(state, frames_dir))
        if rows[-1]["t"] != state.t:
            if not self.full_modulation:
                state = self.decompose(state)
            rows.append(self.sample(state))

        trajectory = pd.DataFrame(rows)
        report = rate_report(trajectory, self.system, outcome.status, outcome.reason)
        report.update({"steps": state.step, "rejected_steps": rejects,
                       "wall_time": time.monotonic() - started,
                       "gauge_mode": cfg.gauge_mode.value})
        logger.info("run finished", {"status": outcome.status, "reason": outcome.reason,
                                     "steps": state.step, "lambda": state.lam})
        return RunResult(outcome, trajectory, report, state, outputs)


def write_outputs(result: RunResult, out_dir: Path) -> List[Path]:
    """trajectory.csv and rate_report.json next to any frames already written."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        traj = out_dir / TRAJECTORY_NAME
        result.trajectory.to_csv(traj, index=False, float_format=FLOAT_FORMAT)
        report = out_dir / RATE_REPORT_NAME
        report.write_text(json.dumps(result.report, indent=2, sort_keys=True, default=float))
    except OSError as exc:
        raise FileError(f"could not write simulation outputs: {exc}", out_dir=str(out_dir)) from exc
    result.outputs = [traj, report] + result.outputs
    return result.outputs


def run_blowup(cfg: SimConfig, out_dir: Optional[Path] = None) -> RunResult:
    """Build, run and (when out_dir is given) write one simulation."""
    sim = Simulation(cfg)
    result = sim.run(out_dir)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result
