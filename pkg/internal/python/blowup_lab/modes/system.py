"""
The finite-dimensional law of the modulation parameters.

    (b_k)_s + (2k - gamma) b_1 b_k - b_{k+1} = 0,   1 <= k <= L,  b_{L+1} = 0

with the explicit solution b_k = c_k / s^k.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from internal.python.blowup_lab.models.errors import ParameterError
from internal.python.blowup_lab.profile.ground_state import gamma_exponent, spectral_params

CoefficientRule = Callable[[float, int, int], np.ndarray]


def explicit_coefficients(gamma: float, ell: int, L: int) -> np.ndarray:
    """c_1 = ell/(2 ell - gamma), c_{k+1} = -gamma (ell - k)/(2 ell - gamma) c_k, zero past ell."""
    if 2 * ell <= gamma:
        raise ParameterError("regime requires 2*ell > gamma", ell=ell, gamma=gamma)
    if L < ell:
        raise ParameterError("need L >= ell", L=L, ell=ell)
    c = np.zeros(L)
    c[0] = ell / (2.0 * ell - gamma)
    for k in range(1, ell):
        c[k] = -gamma * (ell - k) / (2.0 * ell - gamma) * c[k - 1]
    return c


@dataclass(frozen=True)
class ModeSystem:
    """b-system for one (d, ell, L)."""
    d: int
    gamma: float
    ell: int
    L: int
    c: np.ndarray

    @property
    def delta(self) -> float:
        return spectral_params(self.d)[1]

    def s_exponent(self) -> float:
        """lambda ~ s^{-ell/(2 ell - gamma)}."""
        return -self.ell / (2.0 * self.ell - self.gamma)

    def t_exponent(self) -> float:
        """lambda ~ (T - t)^{ell/gamma}."""
        return self.ell / self.gamma

    def to_dict(self) -> dict:
        return {"d": self.d, "gamma": self.gamma, "ell": self.ell, "L": self.L, "c": self.c.tolist()}


def make_mode_system(d: int, ell: int, L: Optional[int] = None,
                     rule: CoefficientRule = explicit_coefficients) -> ModeSystem:
    gamma = gamma_exponent(d)
    L = ell if L is None else L
    return ModeSystem(d=d, gamma=gamma, ell=ell, L=L, c=rule(gamma, ell, L))


def law(gamma: float, b: np.ndarray) -> np.ndarray:
    """(b_k)_s prescribed by the system."""
    b = np.asarray(b, dtype=float)
    k = np.arange(1, b.size + 1)
    shifted = np.append(b[1:], 0.0)
    return -(2.0 * k - gamma) * b[0] * b + shifted


def system_residual(gamma: float, b: np.ndarray, b_s: np.ndarray) -> np.ndarray:
    """(b_k)_s + (2k - gamma) b_1 b_k - b_{k+1} for given values."""
    return np.asarray(b_s, dtype=float) - law(gamma, b)


def explicit_solution(system: ModeSystem, s: float) -> np.ndarray:
    """b^e_k(s) = c_k / s^k."""
    if s <= 0:
        raise ParameterError("s must be positive", s=s)
    k = np.arange(1, system.L + 1)
    return system.c / s ** k


def explicit_derivative(system: ModeSystem, s: float) -> np.ndarray:
    k = np.arange(1, system.L + 1)
    return -k * system.c / s ** (k + 1)


def explicit_residual(system: ModeSystem, s: float) -> float:
    """Largest |residual| of the system at b^e(s), scaled by s^{k+1}."""
    k = np.arange(1, system.L + 1)
    res = system_residual(system.gamma, explicit_solution(system, s), explicit_derivative(system, s))
    return float(np.max(np.abs(res * s ** (k + 1))))
