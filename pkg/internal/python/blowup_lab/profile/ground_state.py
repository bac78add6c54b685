"""
Stationary harmonic map Q and its derived background fields.

Q solves Q'' + (d-1)/y Q' - (d-1)/(2y^2) sin(2Q) = 0 with Q(0) = 0, Q'(0) = 1.
In x = log y the equation is autonomous,

    Q_xx = -(d-2) Q_x + (d-1)/2 sin(2Q),

and is integrated in two phases: Q itself up to y = 1, then the complement
v = pi/2 - Q beyond, so the tail keeps full relative accuracy.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from internal.python.blowup_lab.models.errors import (
    DomainError,
    InternalError,
    ParameterError,
    ProfileError,
    TailFitError,
)
from internal.python.blowup_lab.numerics.fitting import fit_power_law
from internal.python.blowup_lab.numerics.grid import (
    GridFunction,
    RadialGrid,
    differentiate,
    dx,
    integrate,
)
from internal.python.common.logger import default_logger

logger = default_logger.child("profile")

ODE_RTOL = 1e-10
ODE_ATOL = 1e-20
TAIL_FIT_MAX_RESIDUAL = 1e-2


def gamma_exponent(d: int) -> float:
    """gamma = (d - 2 - sqrt(d^2 - 8d + 8)) / 2, in (1, 2] for d >= 7."""
    if d < 7:
        raise DomainError("gamma is only covered for d >= 7", d=d)
    return 0.5 * (d - 2 - math.sqrt(d * d - 8 * d + 8))


def gamma_prime(d: int) -> float:
    """The second root (d - 2 + sqrt(d^2 - 8d + 8)) / 2."""
    if d < 7:
        raise DomainError("gamma is only covered for d >= 7", d=d)
    return 0.5 * (d - 2 + math.sqrt(d * d - 8 * d + 8))


def spectral_params(d: int) -> Tuple[int, float]:
    """hbar and delta: integer and fractional parts of (d/2 - gamma)/2."""
    half = 0.5 * (0.5 * d - gamma_exponent(d))
    hbar = int(math.floor(half))
    delta = half - hbar
    if not 0.0 < delta < 1.0:
        raise InternalError("delta must lie strictly inside (0, 1)", d=d, delta=delta)
    return hbar, delta


def series_coefficient(d: int) -> float:
    """c_1 in Q = y + c_1 y^3 + O(y^5)."""
    return -(d - 1) / (3.0 * (d + 2))


@dataclass(frozen=True, eq=False)
class ProfilePack:
    """Q and every background field the operator calculus needs, for one d."""
    d: int
    gamma: float
    a0: float
    hbar: int
    delta: float
    grid: RadialGrid
    Q: GridFunction
    Qc: GridFunction  # pi/2 - Q, accurate in the tail
    LamQ: GridFunction
    V: GridFunction
    Z: GridFunction
    Ztilde: GridFunction
    Gamma: Optional[GridFunction] = None
    measured_gamma: float = float("nan")

    @property
    def gamma_tilde(self) -> float:
        return math.sqrt(self.d * self.d - 8 * self.d + 8)

    def sin2Q(self) -> np.ndarray:
        """sin(2Q) evaluated from whichever representation is accurate."""
        return _sin2(self.Q.values, self.Qc.values)

    def cos2Q(self) -> np.ndarray:
        return _cos2(self.Q.values, self.Qc.values)

    def LamZ(self) -> np.ndarray:
        """Lambda Z = -2(d-1) sin(2Q) LamQ, analytic."""
        return -2.0 * (self.d - 1) * self.sin2Q() * self.LamQ.values


def _sin2(Q: np.ndarray, Qc: np.ndarray) -> np.ndarray:
    # sin(2Q) = sin(2v) for v = pi/2 - Q
    return np.where(Q < math.pi / 4, np.sin(2.0 * Q), np.sin(2.0 * Qc))


def _cos2(Q: np.ndarray, Qc: np.ndarray) -> np.ndarray:
    return np.where(Q < math.pi / 4, np.cos(2.0 * Q), -np.cos(2.0 * Qc))


def solve_Q(grid: RadialGrid) -> ProfilePack:
    """
    Integrate the ground state on the grid and populate all derived fields.

    Raises ProfileError if the integrator fails or Q leaves (-pi, pi).
    """
    d = grid.d
    if grid.y_max < 1e3:
        raise ParameterError("ground state needs y_max >= 1e3", y_max=grid.y_max)
    gamma = gamma_exponent(d)
    hbar, delta = spectral_params(d)
    c1 = series_coefficient(d)
    x = grid.x
    y0 = grid.y_min

    def inner_rhs(_, state):
        q, qx = state
        return [qx, -(d - 2) * qx + 0.5 * (d - 1) * math.sin(2.0 * q)]

    def outer_rhs(_, state):
        v, vx = state
        return [vx, -(d - 2) * vx - 0.5 * (d - 1) * math.sin(2.0 * v)]

    start = [y0 + c1 * y0 ** 3, y0 + 3.0 * c1 * y0 ** 3]
    inner_nodes = x[x <= 0.0]
    outer_nodes = x[x > 0.0]

    logger.debug("integrating ground state", {"d": d, "n": grid.n, "y_max": grid.y_max})
    inner = solve_ivp(inner_rhs, (x[0], 0.0), start, method="DOP853", rtol=ODE_RTOL,
                      atol=ODE_ATOL, t_eval=inner_nodes, dense_output=True)
    if not inner.success:
        raise ProfileError("ground state integration failed near the origin", message=inner.message)
    q1, qx1 = inner.sol(0.0)
    outer = solve_ivp(outer_rhs, (0.0, x[-1]), [math.pi / 2 - q1, -qx1], method="DOP853",
                      rtol=ODE_RTOL, atol=ODE_ATOL, t_eval=outer_nodes)
    if not outer.success:
        raise ProfileError("ground state integration failed in the tail", message=outer.message)

    Q = np.concatenate([inner.y[0], math.pi / 2 - outer.y[0]])
    Qc = np.concatenate([math.pi / 2 - inner.y[0], outer.y[0]])
    LamQ = np.concatenate([inner.y[1], -outer.y[1]])
    if not np.all(np.isfinite(Q)) or np.any(np.abs(Q) >= math.pi):
        raise ProfileError("ground state left (-pi, pi); the grid is unsuitable", d=d)

    sin2 = _sin2(Q, Qc)
    cos2 = _cos2(Q, Qc)
    V = -(d - 2) + (d - 1) * sin2 / (2.0 * LamQ)
    Qxx = V * LamQ

    Qf = grid.function(Q, 1, 0.0)
    Qcf = grid.function(Qc, 0, -gamma)
    LamQf = GridFunction(grid, LamQ, 1, -gamma, dilation=Qxx)
    Vf = grid.function(V, 0, 0.0)
    Zf = grid.function((d - 1) * cos2, 0, 0.0)
    LamV = dx(Vf)
    Ztilde = (V + 1.0) ** 2 + (d - 2) * (V + 1.0) - LamV
    Ztf = grid.function(Ztilde, 0, 0.0)

    pack = ProfilePack(
        d=d, gamma=gamma, a0=float("nan"), hbar=hbar, delta=delta, grid=grid,
        Q=Qf, Qc=Qcf, LamQ=LamQf, V=Vf, Z=Zf, Ztilde=Ztf,
    )
    a0, measured = fit_tail(pack)
    pack = replace(pack, a0=a0, measured_gamma=measured)
    pack = replace(pack, Gamma=build_Gamma(pack))
    logger.info("ground state ready", {"d": d, "gamma": gamma, "a0": a0, "measured_gamma": measured})
    return pack


def _last_decade(grid: RadialGrid) -> np.ndarray:
    return grid.y >= grid.y_max / 10.0


def _first_decade(grid: RadialGrid) -> np.ndarray:
    return grid.y <= grid.y_min * 10.0


def fit_tail(pack: ProfilePack) -> Tuple[float, float]:
    """Fit pi/2 - Q = a0 y^{-gamma} over the last decade; returns (a0, measured gamma)."""
    fit = fit_power_law(pack.grid.y, pack.Qc.values, mask=_last_decade(pack.grid))
    if fit.residual > TAIL_FIT_MAX_RESIDUAL:
        raise TailFitError("tail of Q is not a clean power law", residual=fit.residual)
    return fit.prefactor, -fit.exponent


def build_Gamma(pack: ProfilePack) -> GridFunction:
    """
    Second kernel element of L, paired with Lambda Q through the Wronskian.

    Gamma = -LamQ * int_y^inf dxi / (xi^{d-1} LamQ^2), the decaying member of
    the family LamQ * int_1^y (...) + c LamQ. The integral is accumulated in x
    from y_max inward with the corrected trapezoid; the part beyond y_max is
    closed with the tail power law.
    """
    grid = pack.grid
    d, gamma = pack.d, pack.gamma
    lam = pack.LamQ.values
    g_vals = np.exp(-(d - 2) * grid.x) / lam ** 2
    decay = d - 2 - 2.0 * gamma
    g = grid.function(g_vals, -d, -decay)
    gx = dx(g)
    h = grid.h
    cells = 0.5 * h * (g_vals[:-1] + g_vals[1:]) - (h * h / 12.0) * (gx[1:] - gx[:-1])
    J = np.empty_like(g_vals)
    J[-1] = g_vals[-1] / decay
    J[:-1] = J[-1] + np.cumsum(cells[::-1])[::-1]
    Gamma = -lam * J
    dil = pack.V.values * Gamma + lam * g_vals
    return GridFunction(grid, Gamma, -(d - 1), -(d - 2 - gamma), dilation=dil)


# -- property checks --------------------------------------------------------

def potential_identity_residual(pack: ProfilePack, margin: int = 4) -> float:
    """max |Z - (V^2 + Lambda V + (d-2) V)| on interior nodes."""
    V = pack.V.values
    residual = pack.Z.values - (V ** 2 + dx(pack.V) + (pack.d - 2) * V)
    mask = pack.grid.interior(margin)
    return float(np.max(np.abs(residual[mask])))


def wronskian_residual(pack: ProfilePack, margin: int = 4) -> float:
    """max |(Gamma' LamQ - Gamma LamQ') y^{d-1} - 1| on interior nodes, stencil derivatives."""
    G = pack.Gamma
    lam = pack.LamQ
    plain_G = GridFunction(G.grid, G.values, G.origin_exponent, G.tail_exponent)
    plain_lam = GridFunction(lam.grid, lam.values, lam.origin_exponent, lam.tail_exponent)
    Gy = differentiate(plain_G, 1).values
    Ly = differentiate(plain_lam, 1).values
    y = pack.grid.y
    wr = (Gy * lam.values - G.values * Ly) * y ** (pack.d - 1)
    mask = pack.grid.interior(margin)
    return float(np.max(np.abs(wr[mask] - 1.0)))


def lamq_tail_exponent(pack: ProfilePack) -> float:
    """Measured power of Lambda Q over the last decade (about -gamma)."""
    return fit_power_law(pack.grid.y, pack.LamQ.values, mask=_last_decade(pack.grid)).exponent


def energy(values: np.ndarray, grid: RadialGrid, lam: float = 1.0) -> float:
    """
    Dirichlet energy of u(r) = w(r / lam) on the ball r <= lam y_max:

        E = lam^{d-2} int (w_y^2 + (d-1) sin^2 w / y^2) y^{d-1} dy.
    """
    w = grid.function(values, 1, 0.0)
    wy = differentiate(w, 1).values
    density = wy ** 2 + (grid.d - 1) * np.sin(values) ** 2 / grid.y ** 2
    return lam ** (grid.d - 2) * integrate(grid.function(density, 0, grid.d - 3.0))


def sin_minus_id(u: np.ndarray) -> np.ndarray:
    """sin(u) - u without cancellation for small u."""
    small = np.abs(u) < 1e-2
    u2 = u * u
    series = -u * u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0))
    return np.where(small, series, np.sin(u) - u)


def sine_increment(pack: ProfilePack, theta: np.ndarray, keep_linear: bool = True) -> np.ndarray:
    """
    (d-1)/(2y^2) [sin(2Q + 2 theta) - sin(2Q)], or with the linear part
    2 cos(2Q) theta removed as well, from the accurate sin(2Q), cos(2Q).
    """
    s2, c2 = pack.sin2Q(), pack.cos2Q()
    if keep_linear:
        diff = -2.0 * s2 * np.sin(theta) ** 2 + c2 * np.sin(2.0 * theta)
    else:
        diff = -2.0 * s2 * np.sin(theta) ** 2 + c2 * sin_minus_id(2.0 * theta)
    return (pack.d - 1) / (2.0 * pack.grid.y ** 2) * diff
