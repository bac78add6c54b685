"""
Explicit inversion of L and the kernel iterates T_k.

For L = A* A with A(Lambda Q) = 0 the solution of L w = f that is regular at
the origin is

    A w = 1 / (y^{d-1} LamQ) int_0^y f LamQ xi^{d-1} dxi
    w   = -LamQ int_0^y (A w / LamQ) dxi

Both integrals are accumulated in x with the corrected trapezoid, so the
round trip through the stencil L is consistent at fourth order.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from internal.python.blowup_lab.linop.operators import OperatorContext, apply_L, operator_scale, relative_residual
from internal.python.blowup_lab.models.errors import InversionError, ParameterError
from internal.python.blowup_lab.numerics.fitting import fit_power_law
from internal.python.blowup_lab.numerics.grid import GridFunction, cumulative_integral
from internal.python.common.logger import default_logger

logger = default_logger.child("linop")


def invert_L(ctx: OperatorContext, f: GridFunction) -> GridFunction:
    """
    Solve L w = f with w regular at the origin.

    The returned function caches its dilation Lambda w = V w - y A w, which
    stays accurate in the tail where a stencil derivative would cancel.
    """
    grid = ctx.grid
    d = ctx.d
    y = grid.y
    lam = ctx.pack.LamQ.values
    gamma = ctx.pack.gamma
    p, q = f.origin_exponent, f.tail_exponent

    if not np.any(f.values):
        zero = np.zeros_like(f.values)
        return GridFunction(grid, zero, p + 2, q + 2.0, dilation=zero.copy())

    with np.errstate(over="ignore", invalid="ignore"):
        flux_in = GridFunction(grid, f.values * lam * y ** d, p + 1 + d, q - gamma + d)
        I1 = cumulative_integral(flux_in)
        Aw = I1 / (y ** (d - 1) * lam)
        g2 = GridFunction(grid, Aw * y / lam, p + 1, q + 2.0 + gamma)
        W = cumulative_integral(g2)
        w = -lam * W
        lam_w = ctx.V * w - y * Aw

    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(lam_w))):
        raise InversionError("inversion overflowed; reduce y_max or the growth of f",
                             origin_exponent=p, tail_exponent=q)
    return GridFunction(grid, w, p + 2, max(q + 2.0, -gamma), dilation=lam_w)


@dataclass
class TkFamily:
    """T_0 = Lambda Q and T_{k+1} = -L^{-1} T_k."""
    T: List[GridFunction]
    measured_tail: List[float] = field(default_factory=list)
    round_trip: List[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.T) - 1

    def __getitem__(self, k: int) -> GridFunction:
        return self.T[k]


def tail_exponent_fit(f: GridFunction, decades: float = 1.0) -> float:
    """Slope of log|f| against log y over the last decade(s) of the grid."""
    grid = f.grid
    mask = grid.y >= grid.y_max / 10.0 ** decades
    mask &= grid.interior(3)
    return fit_power_law(grid.y, np.abs(f.values), mask=mask).exponent


def generate_Tk(ctx: OperatorContext, K: int) -> TkFamily:
    """Build T_0..T_K and record tail exponents and L T_{k+1} + T_k round trips."""
    if K < 1:
        raise ParameterError("need K >= 1", K=K)
    pack = ctx.pack
    T0 = GridFunction(ctx.grid, pack.LamQ.values.copy(), 1, -pack.gamma,
                      dilation=pack.V.values * pack.LamQ.values)
    family = TkFamily(T=[T0], measured_tail=[tail_exponent_fit(T0)])
    mask = ctx.grid.interior(6, y_hi=ctx.grid.y_max / 10.0)
    for k in range(K):
        Tk = family.T[-1]
        nxt = -invert_L(ctx, Tk)
        nxt = GridFunction(ctx.grid, nxt.values, 2 * k + 3, 2 * (k + 1) - pack.gamma,
                           dilation=nxt.dilation)
        family.T.append(nxt)
        family.measured_tail.append(tail_exponent_fit(nxt))
        residual = apply_L(ctx, nxt).values + Tk.values
        family.round_trip.append(relative_residual(residual, operator_scale(ctx, nxt), mask))
        logger.debug("kernel iterate", {"k": k + 1, "tail": family.measured_tail[-1],
                                        "round_trip": family.round_trip[-1]})
    return family
