"""
The approximate profile Q_b, its localization and the residual it leaves.

    Q_b  = Q + sum_k b_k T_k + sum_k S_k(b)
    Q~_b = Q + chi_{B1} (Q_b - Q),   B0 = b_1^{-1/2},  B1 = B0^{1+eta}

The residual of Q~_b under the renormalized flow

    Psi~_b = d_s Q~_b - Delta Q~_b + b_1 Lambda Q~_b + (d-1)/(2y^2) sin(2 Q~_b) - chi_{B1} Mod

is computed from the full nonlinear expression, never from the term list.
Two evaluations are offered: the stencil residual, and a consistent one in
which L acting on T_k and S_k is replaced by the relations they were built
from. The latter stays meaningful far below the stencil error, which the
local Sobolev bound needs.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from internal.python.blowup_lab.linop.kernel import TkFamily
from internal.python.blowup_lab.linop.operators import OperatorContext, apply_Lk
from internal.python.blowup_lab.linop.orthogonality import cutoff, cutoff_derivative
from internal.python.blowup_lab.models.errors import ParameterError, RangeError
from internal.python.blowup_lab.modes.system import ModeSystem, explicit_solution, law
from internal.python.blowup_lab.numerics.fitting import PowerLawFit, fit_power_law
from internal.python.blowup_lab.numerics.grid import GridFunction, dx, dxx, weighted_norm_sq
from internal.python.blowup_lab.profile.ground_state import sine_increment
from internal.python.blowup_lab.qb.corrections import CorrectionFamily
from internal.python.common.logger import default_logger

logger = default_logger.child("qb")

LawFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass
class ApproximateProfile:
    """Q_b and Q~_b at one parameter vector b."""
    ctx: OperatorContext
    tks: TkFamily
    corrections: CorrectionFamily
    b: np.ndarray
    eta: float
    B0: float
    B1: float
    capped: bool  # B1 was clamped to the grid rather than set by b_1
    Theta: GridFunction  # Q_b - Q, with analytic dilation
    chi: np.ndarray
    Qb: GridFunction
    Qb_localized: GridFunction
    Psib_tilde: Optional[GridFunction] = field(default=None, repr=False)

    @property
    def L(self) -> int:
        return self.corrections.L

    @property
    def is_trivial(self) -> bool:
        return not np.any(self.b)

    def theta_localized(self) -> GridFunction:
        return GridFunction(self.Theta.grid, self.chi * self.Theta.values, 3, 0.0)

    def to_dict(self) -> Dict[str, object]:
        return {"b": self.b.tolist(), "eta": self.eta, "B0": self.B0, "B1": self.B1,
                "capped": self.capped}


def localization_radii(b1: float, eta: float, cap: Optional[float] = None):
    """(B0, B1, capped); b_1 <= 0 only makes sense with a cap."""
    if b1 <= 0.0:
        if cap is None:
            raise ParameterError("localization needs b_1 > 0", b1=b1)
        return float("inf"), cap, True
    B0 = b1 ** -0.5
    B1 = B0 ** (1.0 + eta)
    if cap is not None and B1 > cap:
        return B0, cap, True
    return B0, B1, False


def assemble_Qb(ctx: OperatorContext, tks: TkFamily, corrections: CorrectionFamily,
                b: Sequence[float], eta: float = 0.05, cap: Optional[float] = None,
                bound_constant: float = 10.0) -> ApproximateProfile:
    """
    Evaluate the expansions at b and localize.

    Without a cap the profile must fit on the grid (2 B1 <= y_max), else
    RangeError; with a cap, B1 is clamped instead. The a priori bound
    |b_k| <= C b_1^k is enforced only when no cap is given.
    """
    grid = ctx.grid
    L = corrections.L
    b = np.asarray(b, dtype=float)
    if b.size != L:
        raise ParameterError("b must have L entries", size=b.size, L=L)
    if not 0.0 < eta < 1.0:
        raise ParameterError("eta must lie in (0, 1)", eta=eta)

    Q = ctx.pack.Q
    if not np.any(b):
        zero = np.zeros(grid.n)
        Theta = GridFunction(grid, zero, 3, 0.0, dilation=zero.copy())
        chi = np.ones(grid.n)
        return ApproximateProfile(ctx, tks, corrections, b, eta, float("inf"), float("inf"), False,
                                  Theta, chi, Q, Q)

    if cap is None:
        if b[0] <= 0.0:
            raise ParameterError("b_1 must be positive", b1=float(b[0]))
        k = np.arange(1, L + 1)
        if np.any(np.abs(b) > bound_constant * b[0] ** k):
            raise ParameterError("b violates |b_k| <= C b_1^k", b=b.tolist(), C=bound_constant)
    B0, B1, capped = localization_radii(float(b[0]), eta, cap)
    if cap is None and 2.0 * B1 > grid.y_max:
        raise RangeError("b_1 too small for the grid: 2 B1 exceeds y_max", B1=B1, y_max=grid.y_max)

    vals = np.zeros(grid.n)
    dil = np.zeros(grid.n)
    for k in range(1, L + 1):
        vals += b[k - 1] * tks[k].values
        dil += b[k - 1] * tks[k].dilation
    for k in range(2, corrections.top + 1):
        Sk = corrections.S[k].evaluate(b)
        vals += Sk.values
        if Sk.dilation is not None:
            dil += Sk.dilation
    tail = 2.0 * (L + 1) - ctx.pack.gamma
    Theta = GridFunction(grid, vals, 3, tail, dilation=dil)
    chi = cutoff(grid.y / B1)
    Qb = GridFunction(grid, Q.values + vals, 1, tail)
    Qbt = GridFunction(grid, Q.values + chi * vals, 1, 0.0)
    logger.debug("assembled profile", {"b": b.tolist(), "B0": B0, "B1": B1})
    return ApproximateProfile(ctx, tks, corrections, b, eta, B0, B1, capped, Theta, chi, Qb, Qbt)


def parameter_directions(profile: ApproximateProfile) -> List[GridFunction]:
    """D_k = dQ_b/db_k = T_k + sum_j dS_j/db_k at b, k = 1..L."""
    out = []
    for k in range(1, profile.L + 1):
        Tk = profile.tks[k]
        D = profile.corrections.derivative_sum(k).evaluate(profile.b)
        dil = None
        if D.dilation is not None:
            dil = Tk.dilation + D.dilation
        out.append(GridFunction(Tk.grid, Tk.values + D.values, Tk.origin_exponent,
                                Tk.tail_exponent, dilation=dil))
    return out


def cutoff_rate(profile: ApproximateProfile) -> np.ndarray:
    """d chi_{B1} / d b_1; zero once B1 is clamped."""
    if profile.capped or profile.is_trivial:
        return np.zeros(profile.Theta.grid.n)
    z = profile.Theta.grid.y / profile.B1
    return cutoff_derivative(z) * z * (1.0 + profile.eta) / (2.0 * profile.b[0])


def mod_vector(profile: ApproximateProfile, b_s: Sequence[float], law_fn: LawFn = law) -> GridFunction:
    """
    Mod = sum_k [(b_k)_s + (2k - gamma) b_1 b_k - b_{k+1}] (T_k + sum_{j>k} dS_j/db_k).
    """
    gamma = profile.ctx.pack.gamma
    bracket = np.asarray(b_s, dtype=float) - law_fn(gamma, profile.b)
    grid = profile.Theta.grid
    vals = np.zeros(grid.n)
    for coeff, D in zip(bracket, parameter_directions(profile)):
        vals += coeff * D.values
    return GridFunction(grid, vals, 3, 2.0 * profile.L - gamma)


def _time_derivative(profile: ApproximateProfile, b_s: np.ndarray, chi: np.ndarray,
                     chi_rate: np.ndarray) -> np.ndarray:
    grid = profile.Theta.grid
    dtheta = np.zeros(grid.n)
    for rate, D in zip(b_s, parameter_directions(profile)):
        dtheta += rate * D.values
    return chi * dtheta + chi_rate * b_s[0] * profile.Theta.values


def stencil_residual(profile: ApproximateProfile, b_s: Optional[Sequence[float]] = None,
                     localized: bool = True, law_fn: LawFn = law) -> GridFunction:
    """
    Full residual of Q~_b (or Q_b when localized is False), with every
    spatial derivative taken by stencils.
    """
    ctx = profile.ctx
    grid = ctx.grid
    y = grid.y
    gamma = ctx.pack.gamma
    if profile.is_trivial:
        return GridFunction(grid, np.zeros(grid.n), 1, 0.0)
    b = profile.b
    rates = law_fn(gamma, b) if b_s is None else np.asarray(b_s, dtype=float)
    chi = profile.chi if localized else np.ones(grid.n)
    chi_rate = cutoff_rate(profile) if localized else np.zeros(grid.n)
    theta = GridFunction(grid, chi * profile.Theta.values, 3,
                         0.0 if localized else profile.Theta.tail_exponent)

    ds = _time_derivative(profile, rates, chi, chi_rate)
    lap = (dxx(theta) + (ctx.d - 2) * dx(theta)) / y ** 2
    adv = b[0] * (ctx.pack.LamQ.values + dx(theta))
    vals = ds - lap + adv + sine_increment(ctx.pack, theta.values, keep_linear=True)
    vals -= chi * mod_vector(profile, rates, law_fn).values
    return GridFunction(grid, vals, 1, 0.0)


def consistent_residual(profile: ApproximateProfile, b_s: Optional[Sequence[float]] = None,
                        law_fn: LawFn = law) -> GridFunction:
    """
    Residual of Q~_b with L T_k = -T_{k-1} and L S_k = -F_k used exactly.

    Only the cutoff commutator and the nonlinearity are evaluated pointwise.
    """
    ctx = profile.ctx
    grid = ctx.grid
    y = grid.y
    gamma = ctx.pack.gamma
    if profile.is_trivial:
        return GridFunction(grid, np.zeros(grid.n), 1, 0.0)
    b = profile.b
    L = profile.L
    rates = law_fn(gamma, b) if b_s is None else np.asarray(b_s, dtype=float)
    chi = profile.chi
    chi_rate = cutoff_rate(profile)
    Theta = profile.Theta.values
    lam_theta = profile.Theta.dilation

    L_theta = np.zeros(grid.n)
    for k in range(1, L + 1):
        L_theta -= b[k - 1] * profile.tks[k - 1].values
    for k in range(2, profile.corrections.top + 1):
        L_theta -= profile.corrections.F[k].evaluate(b).values

    chi_f = GridFunction(grid, chi, 0, 0.0)
    chi_x = dx(chi_f)
    chi_lap = (dxx(chi_f) + (ctx.d - 2) * chi_x) / y ** 2
    L_loc = chi * L_theta - chi_lap * Theta - 2.0 * chi_x * lam_theta / y ** 2

    ds = _time_derivative(profile, rates, chi, chi_rate)
    adv = b[0] * (ctx.pack.LamQ.values + chi_x * Theta + chi * lam_theta)
    vals = ds + L_loc + adv + sine_increment(ctx.pack, chi * Theta, keep_linear=False)
    vals -= chi * mod_vector(profile, rates, law_fn).values
    return GridFunction(grid, vals, 1, 0.0)


@dataclass
class ResidualReport:
    """Weighted norms of the residual at one b."""
    b: List[float]
    B0: float
    B1: float
    norms: List[float]  # int_{y<=2B0} |Psi~|^2 / (1 + y^{4(hbar+m+1)}), m = 0..L
    unlocalized: float  # same for Psi_b, m = 0
    local_sobolev: float  # int_{y<=2M} |L^{hbar+1} Psi~|^2
    stencil_gap: float  # max |stencil - consistent| on y <= 2 B0

    def to_dict(self) -> Dict[str, object]:
        return {
            "b": self.b,
            "B0": self.B0,
            "B1": self.B1,
            "norms": self.norms,
            "unlocalized": self.unlocalized,
            "local_sobolev": self.local_sobolev,
            "stencil_gap": self.stencil_gap,
        }


def compute_Psib(profile: ApproximateProfile, b_s: Optional[Sequence[float]] = None,
                 M: float = 2.0, law_fn: LawFn = law) -> ResidualReport:
    """Residual of the localized profile plus its weighted norm report."""
    ctx = profile.ctx
    grid = ctx.grid
    y = grid.y
    hbar = ctx.pack.hbar
    psi = stencil_residual(profile, b_s, True, law_fn)
    profile.Psib_tilde = psi
    if profile.is_trivial:
        zeros = [0.0] * (profile.L + 1)
        return ResidualReport(profile.b.tolist(), profile.B0, profile.B1, zeros, 0.0, 0.0, 0.0)

    inner = y <= 2.0 * profile.B0
    norms = [weighted_norm_sq(psi, 1.0 / (1.0 + y ** (4.0 * (hbar + m + 1))), inner)
             for m in range(profile.L + 1)]
    plain = stencil_residual(profile, b_s, False, law_fn)
    unloc = weighted_norm_sq(plain, 1.0 / (1.0 + y ** (4.0 * (hbar + 1))), inner)

    consistent = consistent_residual(profile, b_s, law_fn)
    gap = float(np.max(np.abs(psi.values - consistent.values)[inner & grid.interior(3)]))
    high = apply_Lk(ctx, consistent, hbar + 1)
    local = weighted_norm_sq(high, np.ones(grid.n), (y <= 2.0 * M) & grid.interior(3))
    report = ResidualReport(profile.b.tolist(), profile.B0, profile.B1, norms, unloc, local, gap)
    logger.debug("residual norms", report.to_dict())
    return report


def b_on_explicit_curve(system: ModeSystem, b1: float) -> np.ndarray:
    """Point of the explicit solution b_k = c_k / s^k with the given b_1."""
    if b1 <= 0.0:
        raise ParameterError("b_1 must be positive", b1=b1)
    return explicit_solution(system, system.c[0] / b1)


@dataclass
class ScalingReport:
    """Fitted b_1-exponents of the residual norms."""
    b1: List[float]
    reports: List[ResidualReport]
    weighted: List[PowerLawFit]
    unlocalized: PowerLawFit
    local_sobolev: PowerLawFit
    expected_weighted: List[float]
    expected_local_min: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "b1": self.b1,
            "weighted": [f.to_dict() for f in self.weighted],
            "unlocalized": self.unlocalized.to_dict(),
            "local_sobolev": self.local_sobolev.to_dict(),
            "expected_weighted": self.expected_weighted,
            "expected_local_min": self.expected_local_min,
            "reports": [r.to_dict() for r in self.reports],
        }


def residual_scaling(ctx: OperatorContext, tks: TkFamily, corrections: CorrectionFamily,
                     system: ModeSystem, b1_values: Sequence[float], eta: float,
                     M: float = 2.0) -> ScalingReport:
    """Residual norms along the explicit curve and their log-log slopes in b_1."""
    if len(b1_values) < 2:
        raise ParameterError("need at least two b_1 values", count=len(b1_values))
    delta = ctx.pack.delta
    L = corrections.L
    reports = []
    for b1 in b1_values:
        profile = assemble_Qb(ctx, tks, corrections, b_on_explicit_curve(system, b1), eta)
        reports.append(compute_Psib(profile, M=M))
    xs = np.asarray(b1_values, dtype=float)
    weighted = [fit_power_law(xs, [r.norms[m] for r in reports]) for m in range(L + 1)]
    unloc = fit_power_law(xs, [r.unlocalized for r in reports])
    local = fit_power_law(xs, [r.local_sobolev for r in reports])
    expected = [2.0 * m + 4.0 + 2.0 * (1.0 - delta) for m in range(L + 1)]
    logger.info("residual scaling", {"exponents": [f.exponent for f in weighted],
                                     "expected": expected})
    return ScalingReport(list(map(float, xs)), reports, weighted, unloc, local, expected,
                         2.0 * L + 5.0)
