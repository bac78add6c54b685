"""
Power-law fits and extrapolation helpers.

Rates are read off straight lines in log-log coordinates: y = C x^alpha means
log y = log C + alpha log x.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from internal.python.blowup_lab.models.errors import ParameterError


@dataclass
class PowerLawFit:
    """Least-squares line through (log x, log y)."""
    exponent: float
    prefactor: float
    residual: float
    stderr: float
    points: int

    def to_dict(self) -> Dict[str, float]:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "residual": self.residual,
            "stderr": self.stderr,
            "points": self.points,
        }

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.prefactor * np.asarray(x, dtype=float) ** self.exponent


def fit_power_law(x: Sequence[float], y: Sequence[float],
                  mask: Optional[np.ndarray] = None) -> PowerLawFit:
    """
    Fit y = C x^alpha by linear least squares in log-log coordinates.

    Non-positive samples are dropped; residual is the RMS misfit in log y.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    keep = (xa > 0) & (ya > 0) & np.isfinite(xa) & np.isfinite(ya)
    if mask is not None:
        keep &= mask
    if keep.sum() < 2:
        raise ParameterError("power-law fit needs at least two positive samples", points=int(keep.sum()))
    lx, ly = np.log(xa[keep]), np.log(ya[keep])
    (slope, intercept), cov = _polyfit_with_cov(lx, ly)
    misfit = ly - (slope * lx + intercept)
    return PowerLawFit(
        exponent=float(slope),
        prefactor=float(np.exp(intercept)),
        residual=float(np.sqrt(np.mean(misfit ** 2))),
        stderr=float(np.sqrt(max(cov, 0.0))),
        points=int(keep.sum()),
    )


def _polyfit_with_cov(lx: np.ndarray, ly: np.ndarray):
    # polyfit only scales the covariance when there are more points than coefficients
    if lx.size <= 2:
        return np.polyfit(lx, ly, 1), 0.0
    coeffs, cov = np.polyfit(lx, ly, 1, cov=True)
    return coeffs, float(cov[0, 0])


def local_slopes(x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """Point-to-point d log y / d log x, averaged at interior samples."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    dlog = np.diff(ly) / np.diff(lx)
    slopes = np.empty(lx.size)
    slopes[1:-1] = 0.5 * (dlog[1:] + dlog[:-1])
    slopes[0], slopes[-1] = dlog[0], dlog[-1]
    return slopes


def observed_order(errors: Sequence[float], ratio: float = 2.0) -> float:
    """Convergence order from errors on successively refined grids."""
    e = np.asarray(errors, dtype=float)
    if e.size < 2 or np.any(e <= 0):
        raise ParameterError("observed order needs positive errors on two or more grids")
    orders = np.log(e[:-1] / e[1:]) / np.log(ratio)
    return float(np.mean(orders))


def aitken_limit(t1: float, t2: float, t3: float) -> float:
    """
    Limit of a sequence sampled at geometrically growing arguments.

    Exact when t(s) = T - A s^{-p}; falls back to the last value when the
    second difference vanishes.
    """
    d1, d2 = t2 - t1, t3 - t2
    denom = d2 - d1
    if denom == 0.0 or not np.isfinite(denom):
        return t3
    return t3 - d2 * d2 / denom
