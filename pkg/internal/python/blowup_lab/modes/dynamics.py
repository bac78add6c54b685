"""
Integration of the b-system with the scaling laws, rate extraction, the
instability experiment and the shooting of the unstable direction.

State in s: (b_1..b_L, log lambda, t) with

    (log lambda)_s = -b_1,   t_s = lambda^2.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.integrate import solve_ivp

from internal.python.blowup_lab.models.errors import ParameterError, ShootingError
from internal.python.blowup_lab.modes.linearization import LinearizationMatrix, build_Al
from internal.python.blowup_lab.modes.system import ModeSystem, explicit_solution, law
from internal.python.blowup_lab.numerics.fitting import PowerLawFit, aitken_limit, fit_power_law
from internal.python.common.logger import default_logger

logger = default_logger.child("modes")

LAMBDA_FLOOR = 1e-12
RTOL = 1e-12
ATOL = 1e-30

OUTCOME_BLOWUP = "blowup"
OUTCOME_LEFT_REGIME = "left_regime"


@dataclass
class ModeTrajectory:
    """Samples of (s, t, lambda, b) and the fitted rates."""
    s: np.ndarray
    t: np.ndarray
    lam: np.ndarray
    b: np.ndarray  # shape (samples, L)
    T: float
    s_fit: Optional[PowerLawFit]
    t_fit: Optional[PowerLawFit]
    outcome: str = OUTCOME_BLOWUP
    notes: List[str] = field(default_factory=list)

    def summary(self) -> Dict[str, object]:
        return {
            "T": self.T,
            "outcome": self.outcome,
            "s_exponent": None if self.s_fit is None else self.s_fit.exponent,
            "t_exponent": None if self.t_fit is None else self.t_fit.exponent,
            "blowup_constant": None if self.t_fit is None else self.t_fit.prefactor,
            "t_fit": None if self.t_fit is None else self.t_fit.to_dict(),
            "s_fit": None if self.s_fit is None else self.s_fit.to_dict(),
            "b1_s_final": float(self.b[-1, 0] * self.s[-1]),
            "notes": list(self.notes),
        }


def _rhs(gamma: float, L: int):
    def rhs(_, state):
        b = state[:L]
        out = np.empty_like(state)
        out[:L] = law(gamma, b)
        out[L] = -b[0]
        out[L + 1] = math.exp(2.0 * state[L])
        return out
    return rhs


def _b1_event(L: int):
    def event(_, state):
        return state[0]
    event.terminal = True
    event.direction = -1
    return event


def _floor_event(L: int):
    def event(_, state):
        return state[L] - math.log(LAMBDA_FLOOR)
    event.terminal = True
    event.direction = -1
    return event


def fit_window(s: np.ndarray, T: float, t: np.ndarray) -> np.ndarray:
    """Drop the first 20% of samples and the last decade of T - t."""
    n = s.size
    mask = np.zeros(n, dtype=bool)
    mask[int(math.ceil(0.2 * n)):] = True
    remaining = T - t
    if remaining[-1] > 0:
        mask &= remaining > 10.0 * remaining[-1]
    return mask


def integrate_system(system: ModeSystem, b0: np.ndarray, s0: float, s1: float,
                     samples: int = 400, lam0: float = 1.0) -> ModeTrajectory:
    """
    Integrate b and log lambda in s from s0 to s1 (or until lambda < 1e-12).

    T is the Aitken limit of t along s_end/4, s_end/2, s_end; exponents are
    fitted on the window that drops the transient and the last decade.
    """
    b0 = np.asarray(b0, dtype=float)
    if b0.size != system.L:
        raise ParameterError("b0 must have L entries", L=system.L, size=b0.size)
    if not 0 < s0 < s1:
        raise ParameterError("need 0 < s0 < s1", s0=s0, s1=s1)
    L = system.L
    state0 = np.concatenate([b0, [math.log(lam0), 0.0]])
    s_eval = np.geomspace(s0, s1, samples)
    sol = solve_ivp(_rhs(system.gamma, L), (s0, s1), state0, method="DOP853", rtol=RTOL, atol=ATOL,
                    t_eval=s_eval, dense_output=True, events=[_b1_event(L), _floor_event(L)])

    outcome = OUTCOME_BLOWUP
    notes: List[str] = []
    if sol.t_events[0].size:
        outcome = OUTCOME_LEFT_REGIME
        notes.append(f"b_1 reached zero at s={sol.t_events[0][0]:.6g}")
        logger.warn("trajectory left the blowup regime", {"s": float(sol.t_events[0][0])})
    if sol.t_events[1].size:
        notes.append("stopped at the lambda floor")

    s = sol.t
    b = sol.y[:L].T
    lam = np.exp(sol.y[L])
    t = sol.y[L + 1]
    s_end = float(s[-1])
    t_quarter, t_half, t_end = (float(sol.sol(v)[L + 1]) for v in (s_end / 4, s_end / 2, s_end))
    T = aitken_limit(t_quarter, t_half, t_end) if s_end / 4 >= s0 else t_end

    s_fit = t_fit = None
    if outcome == OUTCOME_BLOWUP and s.size >= 10:
        mask = fit_window(s, T, t)
        s_fit = fit_power_law(s, lam, mask=mask)
        t_fit = fit_power_law(T - t, lam, mask=mask)
    return ModeTrajectory(s=s, t=t, lam=lam, b=b, T=T, s_fit=s_fit, t_fit=t_fit,
                          outcome=outcome, notes=notes)


# -- perturbations around the explicit solution ------------------------------

def deviations(system: ModeSystem, s: np.ndarray, b: np.ndarray) -> np.ndarray:
    """U_k = s^k b_k - c_k for k <= ell, one row per sample."""
    s = np.atleast_1d(s)
    b = np.atleast_2d(b)
    k = np.arange(1, system.ell + 1)
    return s[:, None] ** k * b[:, :system.ell] - system.c[:system.ell]


def data_from_modes(system: ModeSystem, lin: LinearizationMatrix, s0: float,
                    v: np.ndarray) -> np.ndarray:
    """b(s0) whose diagonal coordinates P U equal v."""
    U = lin.R @ np.asarray(v, dtype=float)
    b = np.zeros(system.L)
    k = np.arange(1, system.ell + 1)
    b[:system.ell] = (system.c[:system.ell] + U) / s0 ** k
    return b


def _integrate_b(system: ModeSystem, b0: np.ndarray, s0: float, s1: float,
                 s_eval: Optional[np.ndarray] = None, events=None):
    def rhs(_, b):
        return law(system.gamma, b)
    return solve_ivp(rhs, (s0, s1), b0, method="DOP853", rtol=RTOL, atol=ATOL,
                     t_eval=s_eval, events=events)


def instability_experiment(system: ModeSystem, eps: float, seed: int, s0: float = 20.0,
                           decades: float = 1.0, samples: int = 60) -> Dict[str, object]:
    """
    Perturb along each eigenvector of A_ell by +-eps and fit the power of |V_j(s)|.

    The seed draws the amplitude in [eps/2, eps]; eps = 0 instead reports the
    deviation from the explicit solution.
    """
    if system.ell < 2:
        raise ParameterError("instability experiment needs ell >= 2", ell=system.ell)
    if not 0.0 <= eps <= 1e-3:
        raise ParameterError("eps must lie in [0, 1e-3]", eps=eps)
    lin = build_Al(system.gamma, system.ell)
    s1 = s0 * 10.0 ** decades
    s_eval = np.geomspace(s0, s1, samples)

    if eps == 0.0:
        sol = _integrate_b(system, explicit_solution(system, s0), s0, s1, s_eval)
        exact = np.array([explicit_solution(system, v) for v in sol.t])
        scale = np.maximum(np.abs(exact), 1e-300)
        nz = np.abs(exact) > 0
        deviation = float(np.max(np.abs(sol.y.T - exact)[nz] / scale[nz]))
        return {"eps": 0.0, "explicit_deviation": deviation, "modes": []}

    rng = np.random.default_rng(seed)
    modes = []
    for j, expected in enumerate(lin.eigenvalues):
        fitted = []
        for sign in (1.0, -1.0):
            amp = sign * eps * rng.uniform(0.5, 1.0)
            v0 = np.zeros(system.ell)
            v0[j] = amp
            b0 = data_from_modes(system, lin, s0, v0)
            sol = _integrate_b(system, b0, s0, s1, s_eval)
            V = deviations(system, sol.t, sol.y.T) @ lin.P.T
            fitted.append(fit_power_law(sol.t, np.abs(V[:, j])).exponent)
        modes.append({
            "index": j,
            "expected": float(expected),
            "fitted": [float(v) for v in fitted],
            "mean_fitted": float(np.mean(fitted)),
        })
        logger.debug("mode exponent", modes[-1])
    return {"eps": eps, "s0": s0, "s1": s1, "modes": modes}


def shrinking_bound(system: ModeSystem, s: np.ndarray, eta: float) -> np.ndarray:
    """10 s^{-eta (1 - delta) / 2}."""
    return 10.0 * np.asarray(s, dtype=float) ** (-0.5 * eta * (1.0 - system.delta))


def shrinking_set_check(system: ModeSystem, s: np.ndarray, b: np.ndarray,
                        eta: float = 0.05) -> Dict[str, object]:
    """Whether a sampled trajectory stays in the finite-dimensional part of the shrinking set."""
    lin = build_Al(system.gamma, system.ell)
    V = deviations(system, s, b) @ lin.P.T
    bound = shrinking_bound(system, s, eta)
    worst_modes = float(np.max(np.abs(V) / bound[:, None]))
    worst_tail = 0.0
    if system.L > system.ell:
        k = np.arange(system.ell + 1, system.L + 1)
        worst_tail = float(np.max(np.abs(b[:, system.ell:]) * np.asarray(s)[:, None] ** k))
    return {
        "inside": worst_modes <= 1.0 and worst_tail <= 1.0,
        "worst_mode_ratio": worst_modes,
        "worst_tail_ratio": worst_tail,
    }


def stable_seed(s0: float) -> float:
    """Default initial value of the stable coordinate V_1 used when shooting."""
    return 0.5 / math.sqrt(s0)


def shoot_unstable(system: ModeSystem, s0: float, target_s: float, tol: float,
                   eta: float = 0.05, v1: Optional[float] = None,
                   max_iter: int = 200) -> float:
    """
    Bisection on V_2(s0) for ell = 2.

    For each trial the flow runs until |V_2| reaches the shrinking bound or
    target_s; the trial is scored by the sign of V_2 at that moment and the
    bracket closes on the value whose trajectory stays trapped.
    """
    if system.ell != 2:
        raise ParameterError("scalar shooting is only implemented for ell = 2", ell=system.ell)
    if not 0 < s0 < target_s:
        raise ParameterError("need 0 < s0 < target_s", s0=s0, target_s=target_s)
    if tol <= 0:
        raise ParameterError("tol must be positive", tol=tol)
    lin = build_Al(system.gamma, system.ell)
    stable = stable_seed(s0) if v1 is None else v1

    def diag(s, b):
        return (deviations(system, np.array([s]), b[None, :]) @ lin.P.T)[0]

    def exit_event(s, b):
        return abs(diag(s, b)[1]) - shrinking_bound(system, s, eta)
    exit_event.terminal = True
    exit_event.direction = 1

    def score(v2: float) -> float:
        b0 = data_from_modes(system, lin, s0, np.array([stable, v2]))
        sol = _integrate_b(system, b0, s0, target_s, events=[exit_event])
        return float(np.sign(diag(sol.t[-1], sol.y[:, -1])[1]))

    half = 0.99 * float(shrinking_bound(system, s0, eta))
    lo, hi = -half, half
    f_lo, f_hi = score(lo), score(hi)
    if f_lo == f_hi or f_lo == 0.0 or f_hi == 0.0:
        raise ShootingError("could not bracket the trapped value", lo=lo, hi=hi)
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        f_mid = score(mid)
        if f_mid == 0.0:
            return mid
        if f_mid == f_lo:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    logger.debug("shooting converged", {"s0": s0, "value": 0.5 * (lo + hi)})
    return 0.5 * (lo + hi)


def trapped_trajectory(system: ModeSystem, s0: float, target_s: float, v2: float,
                       eta: float = 0.05, v1: Optional[float] = None,
                       samples: int = 200) -> Dict[str, np.ndarray]:
    """Sample V(s) from a shot initial value, with the shrinking bound alongside."""
    lin = build_Al(system.gamma, system.ell)
    stable = stable_seed(s0) if v1 is None else v1
    b0 = data_from_modes(system, lin, s0, np.array([stable, v2]))
    s_eval = np.geomspace(s0, target_s, samples)
    sol = _integrate_b(system, b0, s0, target_s, s_eval)
    V = deviations(system, sol.t, sol.y.T) @ lin.P.T
    return {"s": sol.t, "V": V, "bound": shrinking_bound(system, sol.t, eta)}
