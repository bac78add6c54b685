"""
Linearly implicit time stepping of the renormalized flow.

With w = Q + v and a = lambda_s / lambda the flow reads

    v_s = -L v + a Lambda v + a Lambda Q - (d-1)/(2y^2) N(v)
    N(v) = sin(2Q + 2v) - sin(2Q) - 2 cos(2Q) v

One step solves (I + ds (L_h - a D_h)) v' = v + ds (a Lambda Q - (d-1)/(2y^2) N(v)),
where L_h and D_h are the stencil matrices of L and Lambda. The frozen
linear part carries the stiff 1/y^2 potential, so Q is an exact discrete
steady state. The last node is held at v = 0.
"""

from collections import OrderedDict
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from internal.python.blowup_lab.linop.operators import OperatorContext
from internal.python.blowup_lab.models.errors import SolverFault, StiffnessError
from internal.python.blowup_lab.numerics.grid import GridFunction, _left_ghosts
from internal.python.blowup_lab.profile.ground_state import sine_increment
from internal.python.common.logger import default_logger

logger = default_logger.child("sim")

FIVE_POINT_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
FIVE_POINT_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
THREE_POINT_D1 = np.array([-0.5, 0.0, 0.5])
THREE_POINT_D2 = np.array([1.0, -2.0, 1.0])

GROWTH_LIMITS = (0.2, 2.0)
FACTOR_CACHE = 4


def _ghost_weights(ctx: OperatorContext) -> Tuple[np.ndarray, np.ndarray]:
    """Weights of the two left ghost values on the first three nodes (odd parity)."""
    grid = ctx.grid
    g1, g2 = np.zeros(3), np.zeros(3)
    for k in range(3):
        unit = np.zeros(grid.n)
        unit[k] = 1.0
        g1[k], g2[k] = _left_ghosts(GridFunction(grid, unit, 1, 0.0))
    return g1, g2


def difference_matrices(ctx: OperatorContext) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """
    Sparse x-derivative matrices D1, D2 on the nodes.

    Interior rows use five-point stencils with the left ghosts folded into
    the first three columns, row n-2 falls back to three points, and row n-1
    is left empty for the boundary condition.
    """
    grid = ctx.grid
    n, h = grid.n, grid.h
    g1, g2 = _ghost_weights(ctx)
    rows, cols, v1, v2 = [], [], [], []

    def put(i: int, j: int, a: float, b: float) -> None:
        if j >= 0:
            rows.append(i)
            cols.append(j)
            v1.append(a)
            v2.append(b)
            return
        ghost = g1 if j == -1 else g2
        for k in range(3):
            rows.append(i)
            cols.append(k)
            v1.append(a * ghost[k])
            v2.append(b * ghost[k])

    for i in range(n - 2):
        for offset in range(-2, 3):
            put(i, i + offset, FIVE_POINT_D1[offset + 2] / h, FIVE_POINT_D2[offset + 2] / h ** 2)
    i = n - 2
    for offset in range(-1, 2):
        put(i, i + offset, THREE_POINT_D1[offset + 1] / h, THREE_POINT_D2[offset + 1] / h ** 2)

    D1 = sparse.csr_matrix((v1, (rows, cols)), shape=(n, n))
    D2 = sparse.csr_matrix((v2, (rows, cols)), shape=(n, n))
    return D1, D2


@dataclass
class StepResult:
    v: np.ndarray
    error: float
    ds: float
    rejects: int


class LinearlyImplicitStepper:
    """Frozen-operator Euler steps with step-doubling error control."""

    def __init__(self, ctx: OperatorContext, tol: float, max_rejects: int,
                 ds_max: float, cfl: float):
        self.ctx = ctx
        self.tol = tol
        self.max_rejects = max_rejects
        self.ds_max = ds_max
        self.cfl = cfl
        y = ctx.y
        self.D1, D2 = difference_matrices(ctx)
        inv_y2 = sparse.diags(1.0 / y ** 2)
        L_h = inv_y2 @ (-D2 - (ctx.d - 2) * self.D1) + sparse.diags(ctx.Z / y ** 2)
        L_h = L_h.tolil()
        L_h[ctx.grid.n - 1, :] = 0.0
        self.L_h = L_h.tocsc()
        self.D1 = self.D1.tocsc()
        self.identity = sparse.identity(ctx.grid.n, format="csc")
        self._factors: "OrderedDict[Tuple[float, float], object]" = OrderedDict()

    def quantize(self, ds: float) -> float:
        """Round ds down to a quarter-octave value so factorizations can be reused."""
        k = np.floor(4.0 * np.log2(ds))
        return float(2.0 ** (k / 4.0))

    def limit(self, ds: float, a: float) -> float:
        """Clamp ds by ds_max and the advection number |a| ds / h <= cfl."""
        ds = min(ds, self.ds_max)
        if a != 0.0:
            ds = min(ds, self.cfl * self.ctx.grid.h / abs(a))
        return ds

    def _solver(self, ds: float, a: float):
        key = (ds, a)
        if key in self._factors:
            self._factors.move_to_end(key)
            return self._factors[key]
        matrix = self.identity + ds * (self.L_h - a * self.D1)
        lu = splu(matrix.tocsc())
        self._factors[key] = lu
        if len(self._factors) > FACTOR_CACHE:
            self._factors.popitem(last=False)
        return lu

    def explicit_part(self, v: np.ndarray, a: float) -> np.ndarray:
        pack = self.ctx.pack
        nonlinear = sine_increment(pack, v, keep_linear=False)
        return a * pack.LamQ.values - nonlinear

    def euler(self, v: np.ndarray, ds: float, a: float) -> np.ndarray:
        rhs = v + ds * self.explicit_part(v, a)
        rhs[-1] = 0.0
        out = self._solver(ds, a).solve(rhs)
        if not np.all(np.isfinite(out)):
            raise SolverFault("time step produced non-finite values", ds=ds, a=a)
        return out

    def advance(self, v: np.ndarray, ds: float, a: float) -> StepResult:
        """
        One accepted step from v, shrinking ds until the step-doubling
        estimate is below tol. Use next_ds for the following step size.
        """
        ds = self.quantize(self.limit(ds, a))
        rejects = 0
        while True:
            full = self.euler(v, ds, a)
            half = self.euler(self.euler(v, 0.5 * ds, a), 0.5 * ds, a)
            error = float(np.max(np.abs(full - half)))
            if error <= self.tol:
                return StepResult(v=half, error=error, ds=ds, rejects=rejects)
            rejects += 1
            if rejects > self.max_rejects:
                raise StiffnessError("step rejected too many times", ds=ds, error=error,
                                     rejects=rejects)
            shrink = float(np.clip(0.9 * np.sqrt(self.tol / error), *GROWTH_LIMITS))
            ds = self.quantize(ds * shrink)
            logger.debug("step rejected", {"error": error, "next_ds": ds})

    def next_ds(self, result: StepResult) -> float:
        if result.error == 0.0:
            return result.ds * GROWTH_LIMITS[1]
        grow = 0.9 * np.sqrt(self.tol / result.error)
        return result.ds * float(np.clip(grow, *GROWTH_LIMITS))


def rezone(values: np.ndarray, y: np.ndarray, h: float, m: int) -> np.ndarray:
    """
    Shift a gauge-frame profile by m cells: w'(x_i) = w(x_{i-m}).

    The m nodes entering at the origin are filled with the odd series
    a_1 y + a_3 y^3 fitted on the first nodes; m nodes leave at y_max.
    """
    if m <= 0:
        return values.copy()
    out = np.empty_like(values)
    out[m:] = values[:-m]
    fit_nodes = slice(0, 6)
    basis = np.column_stack([y[fit_nodes], y[fit_nodes] ** 3])
    coeff, *_ = np.linalg.lstsq(basis, values[fit_nodes], rcond=None)
    z = y[:m] * np.exp(-m * h)
    out[:m] = coeff[0] * z + coeff[1] * z ** 3
    return out
