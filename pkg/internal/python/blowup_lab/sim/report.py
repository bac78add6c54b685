"""
Rate extraction from a finished trajectory.

The blowup time comes from an Aitken limit of t(s), refined by a nonlinear
fit of t = T - (lambda / c)^{1/p} on the last two decades of lambda. The
t-exponent of lambda is then read off a straight log-log line in T - t.
"""

from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import curve_fit

from internal.python.blowup_lab.models.errors import ParameterError
from internal.python.blowup_lab.modes.system import ModeSystem
from internal.python.blowup_lab.numerics.fitting import PowerLawFit, aitken_limit, fit_power_law
from internal.python.common.logger import default_logger

logger = default_logger.child("sim")

FIT_LAMBDA_DECADES = 2.0
EXPONENT_LAMBDA_DECADES = 3.0
TAIL_FRACTION = 0.1


def _aitken_time(frame: pd.DataFrame) -> Optional[float]:
    s = frame["s"].to_numpy()
    t = frame["t"].to_numpy()
    s_end = s[-1]
    s_lo = max(0.25 * s_end, s[0])
    if s_lo >= s_end:
        return None
    s_mid = np.sqrt(s_lo * s_end)
    t1, t2, t3 = np.interp([s_lo, s_mid, s_end], s, t)
    return float(aitken_limit(t1, t2, t3))


def _time_model(lam: np.ndarray, T: float, log_c: float, p: float) -> np.ndarray:
    return T - (lam / np.exp(log_c)) ** (1.0 / p)


def estimate_blowup_time(frame: pd.DataFrame, system: ModeSystem) -> Dict[str, Any]:
    """
    Blowup time T with its Aitken starting value.

    The fit uses samples with lambda <= 100 lambda_end, weighted by the
    expected distance to T so every decade counts alike.
    """
    lam = frame["lambda"].to_numpy()
    t = frame["t"].to_numpy()
    T0 = _aitken_time(frame)
    out: Dict[str, Any] = {"T_aitken": T0, "T": T0, "fit_converged": False}
    if T0 is None or not np.isfinite(T0):
        return out

    p0 = system.t_exponent()
    gap = T0 - t[-1]
    if gap <= 0.0:
        gap = max(abs(t[-1] - t[-2]), np.finfo(float).eps * abs(T0))
    log_c0 = float(np.log(lam[-1]) - p0 * np.log(gap))
    window = lam <= 10.0 ** FIT_LAMBDA_DECADES * lam[-1]
    if window.sum() < 4:
        return out
    sigma = np.maximum((lam[window] / np.exp(log_c0)) ** (1.0 / p0), gap)
    try:
        params, _ = curve_fit(_time_model, lam[window], t[window], p0=[T0, log_c0, p0],
                              sigma=sigma, maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        logger.warn("blowup time fit failed, keeping the Aitken value", {"error": str(exc)})
        return out
    if params[0] >= t[-1] and np.isfinite(params[0]):
        out["T"] = float(params[0])
        out["fit_converged"] = True
        out["fit_exponent"] = float(params[2])
    return out


def exponent_window(frame: pd.DataFrame, T: float) -> np.ndarray:
    """lambda <= 1e3 lambda_end with the last decade of T - t left out."""
    lam = frame["lambda"].to_numpy()
    gap = T - frame["t"].to_numpy()
    mask = (lam <= 10.0 ** EXPONENT_LAMBDA_DECADES * lam[-1]) & (gap > 0.0)
    if not mask.any():
        return mask
    return mask & (gap >= 10.0 * gap[mask].min())


def fit_rate(frame: pd.DataFrame, T: float) -> Tuple[PowerLawFit, np.ndarray]:
    mask = exponent_window(frame, T)
    gap = T - frame["t"].to_numpy()
    return fit_power_law(gap, frame["lambda"].to_numpy(), mask), mask


def type_ii_growth(frame: pd.DataFrame, T: float) -> Dict[str, Optional[float]]:
    """Growth of (T - t)^{1/2} max|u_r| over the run and over its last two decades of T - t."""
    gap = T - frame["t"].to_numpy()
    ok = gap > 0.0
    if ok.sum() < 2:
        return {"run": None, "last_two_decades": None}
    indicator = np.sqrt(gap[ok]) * frame["grad_max"].to_numpy()[ok]
    g = gap[ok]
    last = int(np.argmin(g))
    ref = int(np.argmin(np.abs(np.log(g) - np.log(100.0 * g[last]))))
    return {
        "run": float(indicator[last] / indicator[0]),
        "last_two_decades": float(indicator[last] / indicator[ref]),
    }


def rate_report(frame: pd.DataFrame, system: ModeSystem, status: str,
                reason: Optional[str]) -> Dict[str, Any]:
    """Everything rate_report.json carries."""
    report: Dict[str, Any] = {
        "status": status,
        "reason": reason,
        "d": system.d,
        "ell": system.ell,
        "L": system.L,
        "gamma": system.gamma,
        "expected_exponent": system.t_exponent(),
        "c1": float(system.c[0]),
        "samples": int(len(frame)),
        "decomposition": "per_step_newton_projection",
    }
    tail = frame.iloc[int((1.0 - TAIL_FRACTION) * len(frame)):]
    b1_s = (tail["b_1"] * tail["s"]).to_numpy()
    report["b1_s"] = float(np.mean(b1_s)) if b1_s.size else None

    e2 = frame["E_2"].to_numpy()
    start = int(TAIL_FRACTION * len(e2))
    if e2.size > start + 1 and e2[start] > 0.0:
        report["E_2_growth"] = float(np.max(e2[start:]) / e2[start])
    else:
        report["E_2_growth"] = None

    timing = estimate_blowup_time(frame, system)
    report.update(timing)
    T = timing["T"]
    report.update({"exponent": None, "exponent_stderr": None, "c": None,
                   "fit_residual": None, "fit_points": 0, "lambda_decades": 0.0})
    report["type_ii_indicator_growth"] = {"run": None, "last_two_decades": None}
    if T is None:
        return report
    try:
        fit, mask = fit_rate(frame, T)
    except ParameterError as exc:
        logger.warn("rate fit unavailable", {"error": str(exc)})
        return report
    lam = frame["lambda"].to_numpy()[mask]
    report.update({
        "exponent": fit.exponent,
        "exponent_stderr": fit.stderr,
        "c": fit.prefactor,
        "fit_residual": fit.residual,
        "fit_points": fit.points,
        "lambda_decades": float(np.log10(lam.max() / lam.min())),
    })
    report["type_ii_indicator_growth"] = type_ii_growth(frame, T)
    logger.info("rate report", {"T": T, "exponent": fit.exponent,
                                "expected": system.t_exponent()})
    return report
