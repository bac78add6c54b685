"""Grids, quadrature, finite differences and fitting helpers."""

from .fitting import PowerLawFit, aitken_limit, fit_power_law, observed_order
from .grid import (
    GridFunction,
    RadialGrid,
    cumulative_integral,
    differentiate,
    dilation,
    dx,
    dxx,
    inner_product,
    integrate,
    make_grid,
    weighted_norm_sq,
)

__all__ = [
    "GridFunction",
    "PowerLawFit",
    "RadialGrid",
    "aitken_limit",
    "cumulative_integral",
    "differentiate",
    "dilation",
    "dx",
    "dxx",
    "fit_power_law",
    "inner_product",
    "integrate",
    "make_grid",
    "observed_order",
    "weighted_norm_sq",
]
