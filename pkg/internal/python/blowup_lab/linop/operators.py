"""
Linearized operator around Q and its factorization.

With x = log y and V = Lambda log(Lambda Q):

    A  w = (V w - w_x) / y
    A* w = (w_x + (d - 1 + V) w) / y
    L  w = A* A w = (-w_xx - (d-2) w_x + Z w) / y^2
    L~ w = A A* w = (-w_xx - (d-2) w_x + Z~ w) / y^2

All applications are stencil applications on the grid; cached analytic
dilations on the inputs are deliberately ignored here.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from internal.python.blowup_lab.numerics.grid import GridFunction, RadialGrid, dilation, dx, dxx
from internal.python.blowup_lab.profile.ground_state import ProfilePack


@dataclass(frozen=True, eq=False)
class OperatorContext:
    """Background fields of L for one ground state."""
    pack: ProfilePack

    @property
    def grid(self) -> RadialGrid:
        return self.pack.grid

    @property
    def d(self) -> int:
        return self.pack.d

    @property
    def y(self) -> np.ndarray:
        return self.pack.grid.y

    @property
    def V(self) -> np.ndarray:
        return self.pack.V.values

    @property
    def Z(self) -> np.ndarray:
        return self.pack.Z.values

    @property
    def LamZ(self) -> np.ndarray:
        return self.pack.LamZ()


def make_context(pack: ProfilePack) -> OperatorContext:
    return OperatorContext(pack)


def _origin_after_L(p: int) -> int:
    # (-p^2 - (d-2) p + (d-1)) vanishes only at p = 1
    return 1 if p == 1 else p - 2


def apply_A(ctx: OperatorContext, f: GridFunction) -> GridFunction:
    vals = (ctx.V * f.values - dx(f)) / ctx.y
    p = f.origin_exponent
    return GridFunction(f.grid, vals, 2 if p == 1 else p - 1, f.tail_exponent - 1.0)


def apply_Astar(ctx: OperatorContext, f: GridFunction) -> GridFunction:
    vals = (dx(f) + (ctx.d - 1 + ctx.V) * f.values) / ctx.y
    return GridFunction(f.grid, vals, f.origin_exponent - 1, f.tail_exponent - 1.0)


def _second_order(ctx: OperatorContext, f: GridFunction, potential: np.ndarray) -> GridFunction:
    vals = (-dxx(f) - (ctx.d - 2) * dx(f) + potential * f.values) / ctx.y ** 2
    return GridFunction(f.grid, vals, _origin_after_L(f.origin_exponent), f.tail_exponent - 2.0)


def apply_L(ctx: OperatorContext, f: GridFunction) -> GridFunction:
    return _second_order(ctx, f, ctx.Z)


def apply_Lstil(ctx: OperatorContext, f: GridFunction) -> GridFunction:
    """Conjugate operator A A*, with potential Z~."""
    return _second_order(ctx, f, ctx.pack.Ztilde.values)


def apply_Lk(ctx: OperatorContext, f: GridFunction, k: int) -> GridFunction:
    out = f
    for _ in range(k):
        out = apply_L(ctx, out)
    return out


def operator_scale(ctx: OperatorContext, f: GridFunction) -> np.ndarray:
    """Pointwise size of the terms of L f, used to normalize residuals."""
    return (np.abs(dxx(f)) + (ctx.d - 2) * np.abs(dx(f)) + np.abs(ctx.Z * f.values)) / ctx.y ** 2


def relative_residual(residual: np.ndarray, scale: np.ndarray, mask: np.ndarray) -> float:
    """max |residual| over the mask, divided by the max of the scale there."""
    top = float(np.max(scale[mask])) if np.any(mask) else 0.0
    if top == 0.0:
        return 0.0
    return float(np.max(np.abs(residual[mask]))) / top


def lambda_commutator_check(ctx: OperatorContext, f: GridFunction,
                            mask: Optional[np.ndarray] = None) -> float:
    """
    Residual of L(Lambda f) = Lambda(L f) + 2 L f - (Lambda Z / y^2) f.

    Returned relative to the largest term; zero for f = 0.
    """
    if mask is None:
        mask = ctx.grid.interior(6)
    lam_f = GridFunction(f.grid, dx(f), f.origin_exponent, f.tail_exponent)
    Lf = apply_L(ctx, f)
    lhs = apply_L(ctx, lam_f).values
    lam_Lf = dx(Lf)
    correction = ctx.LamZ * f.values / ctx.y ** 2
    rhs = lam_Lf + 2.0 * Lf.values - correction
    scale = np.maximum.reduce([np.abs(lhs), np.abs(lam_Lf), 2.0 * np.abs(Lf.values), np.abs(correction)])
    return relative_residual(lhs - rhs, scale, mask)


def lambda_of(f: GridFunction) -> GridFunction:
    """Lambda f, analytic when cached on f."""
    return dilation(f)
