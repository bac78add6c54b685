"""
Sampled check of the coercivity of iterates of L.

For f orthogonal to L^m Phi_M (0 <= m <= k - hbar) the quantity
int |L^{k+1} f|^2 should dominate

    int |A L^k f|^2 / y^2
    + sum_{m<=k} int |L^m f|^2 / (y^4 (1 + y^{4(k-m)}))
    + sum_{m<k}  int |A L^m f|^2 / (y^6 (1 + y^{4(k-m-1)})).

The check draws Gaussian bumps in log y, projects them and reports the
smallest ratio.
"""

from typing import List

import numpy as np

from internal.python.blowup_lab.linop.operators import OperatorContext, apply_A, apply_L
from internal.python.blowup_lab.linop.orthogonality import PhiMDirection, L_powers
from internal.python.blowup_lab.models.errors import ConstructionError, ParameterError
from internal.python.blowup_lab.numerics.grid import GridFunction, inner_product, weighted_norm_sq

ORIGIN_EXPONENT = 1


def _constraints(ctx: OperatorContext, phi: PhiMDirection, count: int) -> List[GridFunction]:
    if count <= 0:
        return []
    return L_powers(ctx, phi.Phi, count - 1)


def project_out(f: GridFunction, directions: List[GridFunction]) -> GridFunction:
    """Remove span(directions) from f in the L^2(y^{d-1} dy) sense."""
    if not directions:
        return f
    gram = np.array([[inner_product(u, v) for v in directions] for u in directions])
    rhs = np.array([inner_product(u, f) for u in directions])
    coeffs, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    vals = f.values - sum(a * u.values for a, u in zip(coeffs, directions))
    return GridFunction(f.grid, np.asarray(vals, dtype=float), f.origin_exponent, f.tail_exponent)


def coercivity_ratio(ctx: OperatorContext, f: GridFunction, k: int) -> float:
    """Left side over weighted right side for one admissible f."""
    y = ctx.y
    iterates = [f]
    for _ in range(k + 1):
        iterates.append(apply_L(ctx, iterates[-1]))
    lhs = weighted_norm_sq(iterates[k + 1], np.ones_like(y))
    rhs = weighted_norm_sq(apply_A(ctx, iterates[k]), y ** -2.0)
    for m in range(k + 1):
        rhs += weighted_norm_sq(iterates[m], 1.0 / (y ** 4 * (1.0 + y ** (4.0 * (k - m)))))
    for m in range(k):
        rhs += weighted_norm_sq(apply_A(ctx, iterates[m]),
                                1.0 / (y ** 6 * (1.0 + y ** (4.0 * (k - m - 1)))))
    return lhs / rhs


def coercivity_probe(ctx: OperatorContext, phi: PhiMDirection, k: int, samples: int,
                     seed: int) -> float:
    """Minimum coercivity ratio over random projected bumps."""
    if samples < 1:
        raise ParameterError("need at least one sample", samples=samples)
    if k < 0:
        raise ParameterError("k must be non-negative", k=k)
    rng = np.random.default_rng(seed)
    x = ctx.grid.x
    directions = _constraints(ctx, phi, k - ctx.pack.hbar + 1)
    ratios = []
    for _ in range(samples):
        center = rng.uniform(-1.0, 2.0)
        width = rng.uniform(0.4, 0.8)
        bump = np.exp(-0.5 * ((x - center) / width) ** 2)
        f = GridFunction(ctx.grid, bump, ORIGIN_EXPONENT, 0.0)
        f = project_out(f, directions)
        scale = float(np.max(np.abs(f.values)))
        if scale == 0.0:
            continue
        f = GridFunction(ctx.grid, f.values / scale, ORIGIN_EXPONENT, 0.0)
        ratios.append(coercivity_ratio(ctx, f, k))
    if not ratios:
        raise ConstructionError("every sampled bump vanished after projection", samples=samples, k=k)
    return float(min(ratios))
