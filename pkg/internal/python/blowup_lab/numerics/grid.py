"""
Radial grids, grid functions, quadrature and finite differences.

All grids are log-uniform: y_i = y_min * exp(i h). Every derivative is taken
in x = log y with fourth-order centered stencils, then converted back with
f_y = f_x / y and f_yy = (f_xx - f_x) / y^2. Values outside the node range
are supplied by ghost extrapolation that uses the origin parity and the tail
power recorded on each GridFunction.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np

from internal.python.blowup_lab.models.errors import ParameterError, UsageError

Scalar = Union[int, float]


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Log-uniform nodes on [y_min, y_max] with the measure y^{d-1} dy."""
    d: int
    y: np.ndarray
    h: float
    weights: np.ndarray
    stencil_order: int = 4

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def x(self) -> np.ndarray:
        return np.log(self.y)

    @property
    def y_min(self) -> float:
        return float(self.y[0])

    @property
    def y_max(self) -> float:
        return float(self.y[-1])

    def interior(self, margin: int = 3, y_hi: Optional[float] = None) -> np.ndarray:
        """Boolean mask that drops a few nodes at each end (and optionally y > y_hi)."""
        mask = np.zeros(self.n, dtype=bool)
        mask[margin:self.n - margin] = True
        if y_hi is not None:
            mask &= self.y <= y_hi
        return mask

    def function(self, values: np.ndarray, origin_exponent: int = 1,
                 tail_exponent: float = 0.0) -> "GridFunction":
        return GridFunction(self, np.asarray(values, dtype=float), origin_exponent, tail_exponent)

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.d == other.d and self.n == other.n and np.array_equal(self.y, other.y)
        )


def make_grid(d: int, y_min: float, y_max: float, n: int) -> RadialGrid:
    """
    Build a log-uniform grid with trapezoid-in-x quadrature weights.

    The weight of node i is h * y_i^d (halved at both ends), since
    int f y^{d-1} dy = int f y^d dx.
    """
    if d < 7:
        raise ParameterError("dimension must be >= 7", d=d)
    if not 0.0 < y_min < 1.0 < y_max:
        raise ParameterError("need 0 < y_min < 1 < y_max", y_min=y_min, y_max=y_max)
    if n < 64:
        raise ParameterError("need at least 64 nodes", n=n)

    x = np.linspace(np.log(y_min), np.log(y_max), n)
    h = float(x[1] - x[0])
    y = np.exp(x)
    # pin the endpoints exactly
    y[0], y[-1] = y_min, y_max
    weights = h * y ** d
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return RadialGrid(d=d, y=y, h=h, weights=weights)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """
    Sampled radial function with admissibility metadata.

    origin_exponent is the leading power p in f ~ c y^p at 0 (its parity fixes
    the ghost values), tail_exponent the power q in f ~ c y^q at infinity.
    dilation optionally caches an analytically known Lambda f = y f_y.
    """
    grid: RadialGrid
    values: np.ndarray
    origin_exponent: int = 1
    tail_exponent: float = 0.0
    dilation: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.y.shape:
            raise UsageError("values do not match the grid", shape=self.values.shape)

    @property
    def y(self) -> np.ndarray:
        return self.grid.y

    def with_values(self, values: np.ndarray, dilation: Optional[np.ndarray] = None,
                    **meta) -> "GridFunction":
        return replace(self, values=np.asarray(values, dtype=float), dilation=dilation, **meta)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def _check(self, other: "GridFunction") -> None:
        if not self.grid.same_as(other.grid):
            raise UsageError("grid functions live on different grids")

    def __add__(self, other: Union["GridFunction", Scalar]) -> "GridFunction":
        if isinstance(other, GridFunction):
            self._check(other)
            dil = None
            if self.dilation is not None and other.dilation is not None:
                dil = self.dilation + other.dilation
            return GridFunction(
                self.grid, self.values + other.values,
                min(self.origin_exponent, other.origin_exponent),
                max(self.tail_exponent, other.tail_exponent), dil,
            )
        return GridFunction(self.grid, self.values + other, 0, max(self.tail_exponent, 0.0))

    __radd__ = __add__

    def __neg__(self) -> "GridFunction":
        dil = None if self.dilation is None else -self.dilation
        return replace(self, values=-self.values, dilation=dil)

    def __sub__(self, other: Union["GridFunction", Scalar]) -> "GridFunction":
        return self + (-other)

    def __mul__(self, other: Union["GridFunction", Scalar]) -> "GridFunction":
        if isinstance(other, GridFunction):
            self._check(other)
            dil = None
            if self.dilation is not None and other.dilation is not None:
                dil = self.dilation * other.values + self.values * other.dilation
            return GridFunction(
                self.grid, self.values * other.values,
                self.origin_exponent + other.origin_exponent,
                self.tail_exponent + other.tail_exponent, dil,
            )
        dil = None if self.dilation is None else self.dilation * other
        return replace(self, values=self.values * other, dilation=dil)

    __rmul__ = __mul__


def zeros_like(f: GridFunction) -> GridFunction:
    return replace(f, values=np.zeros_like(f.values), dilation=np.zeros_like(f.values))


# -- quadrature -------------------------------------------------------------

def inner_product(f: GridFunction, g: GridFunction) -> float:
    """<f, g> = int_0^inf f g y^{d-1} dy, truncated at y_max."""
    if not f.grid.same_as(g.grid):
        raise UsageError("inner product of functions on different grids")
    grid = f.grid
    body = float(np.dot(grid.weights, f.values * g.values))
    power = grid.d + f.origin_exponent + g.origin_exponent
    cell = 0.0
    if power > 0:
        cell = f.values[0] * g.values[0] * grid.y_min ** grid.d / power
    return body + cell


def integrate(f: GridFunction) -> float:
    """int_0^inf f y^{d-1} dy on the grid."""
    grid = f.grid
    power = grid.d + f.origin_exponent
    cell = f.values[0] * grid.y_min ** grid.d / power if power > 0 else 0.0
    return float(np.dot(grid.weights, f.values)) + cell


def weighted_norm_sq(f: GridFunction, weight: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """int |f|^2 weight y^{d-1} dy, optionally restricted to a node mask."""
    integrand = f.values ** 2 * weight
    if mask is not None:
        integrand = np.where(mask, integrand, 0.0)
    return float(np.dot(f.grid.weights, integrand))


def cumulative_integral(g: GridFunction) -> np.ndarray:
    """
    G_i = int_{-inf}^{x_i} g dx for g ~ c y^q at the origin (q > 0).

    Corrected trapezoid: each cell adds h/2 (g_i + g_{i+1}) - h^2/12 (g'_{i+1} - g'_i)
    with g' the fourth-order x-derivative; the start value is g_0 / q.
    """
    q = g.origin_exponent
    if q <= 0:
        raise ParameterError("cumulative integral needs a decaying integrand at the origin", q=q)
    h = g.grid.h
    gv = g.values
    gx = dx(g)
    cells = 0.5 * h * (gv[:-1] + gv[1:]) - (h * h / 12.0) * (gx[1:] - gx[:-1])
    out = np.empty_like(gv)
    out[0] = gv[0] / q
    out[1:] = out[0] + np.cumsum(cells)
    return out


# -- finite differences in x = log y ---------------------------------------

def _left_ghosts(f: GridFunction) -> Tuple[float, float]:
    """Quadratic extrapolation of f / y^p in t = (y / y_0)^2 to the two ghost nodes."""
    grid = f.grid
    p = f.origin_exponent
    y0 = grid.y[:3]
    g = f.values[:3] / y0 ** p
    a = np.exp(2.0 * grid.h)
    t_nodes = np.array([1.0, a, a * a])
    ghosts = []
    for k in (1, 2):
        t = a ** (-k)
        coeff = np.array([
            (t - t_nodes[1]) * (t - t_nodes[2]) / ((t_nodes[0] - t_nodes[1]) * (t_nodes[0] - t_nodes[2])),
            (t - t_nodes[0]) * (t - t_nodes[2]) / ((t_nodes[1] - t_nodes[0]) * (t_nodes[1] - t_nodes[2])),
            (t - t_nodes[0]) * (t - t_nodes[1]) / ((t_nodes[2] - t_nodes[0]) * (t_nodes[2] - t_nodes[1])),
        ])
        y_ghost = grid.y_min * np.exp(-k * grid.h)
        ghosts.append(float(np.dot(coeff, g)) * y_ghost ** p)
    return ghosts[0], ghosts[1]


def _right_ghosts(f: GridFunction) -> Tuple[float, float]:
    """Quadratic extrapolation in x of f y^{-q} past y_max."""
    grid = f.grid
    q = f.tail_exponent
    y3 = grid.y[-3:]
    g = f.values[-3:] * y3 ** (-q)
    g1 = g[0] - 3.0 * g[1] + 3.0 * g[2]
    g2 = 3.0 * g[0] - 8.0 * g[1] + 6.0 * g[2]
    e = np.exp(grid.h)
    return g1 * (grid.y_max * e) ** q, g2 * (grid.y_max * e * e) ** q


def _padded(f: GridFunction) -> np.ndarray:
    l1, l2 = _left_ghosts(f)
    r1, r2 = _right_ghosts(f)
    return np.concatenate(([l2, l1], f.values, [r1, r2]))


def dx(f: GridFunction) -> np.ndarray:
    """First derivative in x (= Lambda f), fourth order."""
    v = _padded(f)
    return (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * f.grid.h)


def dxx(f: GridFunction) -> np.ndarray:
    """Second derivative in x, fourth order."""
    v = _padded(f)
    return (-v[:-4] + 16.0 * v[1:-3] - 30.0 * v[2:-2] + 16.0 * v[3:-1] - v[4:]) / (
        12.0 * f.grid.h ** 2
    )


def dilation(f: GridFunction) -> GridFunction:
    """Lambda f = y f_y, analytic if cached, else by stencil."""
    vals = f.dilation if f.dilation is not None else dx(f)
    return GridFunction(f.grid, np.array(vals, dtype=float), f.origin_exponent, f.tail_exponent)


def differentiate(f: GridFunction, order: int) -> GridFunction:
    """y-derivative of order 1 or 2 with metadata shifted accordingly."""
    y = f.grid.y
    p = f.origin_exponent
    if order == 1:
        vals = dx(f) / y
        origin = p - 1 if p != 0 else 1
        return GridFunction(f.grid, vals, origin, f.tail_exponent - 1.0)
    if order == 2:
        fx = dx(f)
        vals = (dxx(f) - fx) / y ** 2
        origin = p - 2 if p >= 2 else (1 if p == 1 else 0)
        return GridFunction(f.grid, vals, origin, f.tail_exponent - 2.0)
    raise ParameterError("derivative order must be 1 or 2", order=order)
