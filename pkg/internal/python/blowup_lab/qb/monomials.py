"""
Polynomials in b = (b_1..b_L) with grid-function coefficients.

A monomial b^m = prod b_j^{m_j} has homogeneity degree sum_j j m_j. The
expansion keeps coefficients exactly, so derivatives in b and the scaling
b -> (mu b_1, mu^2 b_2, ...) are exact.
"""

from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from internal.python.blowup_lab.models.errors import ParameterError
from internal.python.blowup_lab.numerics.grid import GridFunction, RadialGrid

MultiIndex = Tuple[int, ...]


def degree(m: MultiIndex) -> int:
    return sum((j + 1) * mj for j, mj in enumerate(m))


def unit(L: int, j: int) -> MultiIndex:
    """Multi-index of b_j (1-based)."""
    m = [0] * L
    m[j - 1] = 1
    return tuple(m)


def multi_indices(L: int, deg: int) -> List[MultiIndex]:
    """All m with sum_j j m_j = deg."""
    ranges = [range(deg // j + 1) for j in range(1, L + 1)]
    return [m for m in cartesian(*ranges) if degree(m) == deg]


def monomial_value(m: MultiIndex, b: np.ndarray) -> float:
    return float(np.prod([b[j] ** mj for j, mj in enumerate(m)]))


@dataclass
class MonomialExpansion:
    """Map from multi-index to coefficient; all indices share one grid and one L."""
    grid: RadialGrid
    L: int
    terms: Dict[MultiIndex, GridFunction] = field(default_factory=dict)

    def __iter__(self) -> Iterator[Tuple[MultiIndex, GridFunction]]:
        return iter(sorted(self.terms.items()))

    def __len__(self) -> int:
        return len(self.terms)

    def copy(self) -> "MonomialExpansion":
        return MonomialExpansion(self.grid, self.L, dict(self.terms))

    def add_term(self, m: MultiIndex, coeff: GridFunction) -> None:
        if len(m) != self.L:
            raise ParameterError("multi-index length differs from L", m=m, L=self.L)
        if m in self.terms:
            self.terms[m] = self.terms[m] + coeff
        else:
            self.terms[m] = coeff

    def degrees(self) -> List[int]:
        return sorted({degree(m) for m in self.terms})

    def part(self, deg: int) -> "MonomialExpansion":
        return MonomialExpansion(self.grid, self.L, {m: c for m, c in self.terms.items() if degree(m) == deg})

    def up_to(self, deg: int) -> "MonomialExpansion":
        return MonomialExpansion(self.grid, self.L, {m: c for m, c in self.terms.items() if degree(m) <= deg})

    def __add__(self, other: "MonomialExpansion") -> "MonomialExpansion":
        out = self.copy()
        for m, c in other.terms.items():
            out.add_term(m, c)
        return out

    def scale(self, factor: float) -> "MonomialExpansion":
        return MonomialExpansion(self.grid, self.L, {m: c * factor for m, c in self.terms.items()})

    def __neg__(self) -> "MonomialExpansion":
        return self.scale(-1.0)

    def times_function(self, f: GridFunction) -> "MonomialExpansion":
        return MonomialExpansion(self.grid, self.L, {m: c * f for m, c in self.terms.items()})

    def map(self, op: Callable[[GridFunction], GridFunction]) -> "MonomialExpansion":
        """Apply a linear operation coefficientwise."""
        return MonomialExpansion(self.grid, self.L, {m: op(c) for m, c in self.terms.items()})

    def times(self, other: "MonomialExpansion", max_degree: Optional[int] = None) -> "MonomialExpansion":
        """Polynomial product, dropping monomials above max_degree."""
        out = MonomialExpansion(self.grid, self.L)
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                if max_degree is not None and degree(m) > max_degree:
                    continue
                out.add_term(m, c1 * c2)
        return out

    def times_monomials(self, scalars: Dict[MultiIndex, float]) -> "MonomialExpansion":
        """Product with a polynomial that has scalar coefficients."""
        out = MonomialExpansion(self.grid, self.L)
        for m1, c1 in self.terms.items():
            for m2, a in scalars.items():
                if a == 0.0:
                    continue
                out.add_term(tuple(x + y for x, y in zip(m1, m2)), c1 * a)
        return out

    def derivative(self, j: int) -> "MonomialExpansion":
        """Exact partial derivative in b_j (1-based)."""
        out = MonomialExpansion(self.grid, self.L)
        for m, c in self.terms.items():
            if m[j - 1] == 0:
                continue
            lowered = list(m)
            lowered[j - 1] -= 1
            out.add_term(tuple(lowered), c * float(m[j - 1]))
        return out

    def evaluate(self, b: np.ndarray) -> GridFunction:
        """Sum of coefficient * b^m; dilations are summed when every term carries one."""
        b = np.asarray(b, dtype=float)
        vals = np.zeros(self.grid.n)
        dil: Optional[np.ndarray] = np.zeros(self.grid.n)
        origin, tail = 10 ** 6, -np.inf
        for m, c in self.terms.items():
            w = monomial_value(m, b)
            if w == 0.0:
                continue
            vals += w * c.values
            if dil is not None:
                dil = None if c.dilation is None else dil + w * c.dilation
            origin = min(origin, c.origin_exponent)
            tail = max(tail, c.tail_exponent)
        if origin == 10 ** 6:
            origin, tail = 1, 0.0
        return GridFunction(self.grid, vals, origin, float(tail), dilation=dil)


def scalar_law(L: int, gamma: float, j: int) -> Dict[MultiIndex, float]:
    """(b_j)_s = -(2j - gamma) b_1 b_j + b_{j+1} as a scalar polynomial, b_{L+1} = 0."""
    out: Dict[MultiIndex, float] = {}
    m = list(unit(L, 1))
    m[j - 1] += 1
    out[tuple(m)] = -(2.0 * j - gamma)
    if j < L:
        out[unit(L, j + 1)] = 1.0
    return out
