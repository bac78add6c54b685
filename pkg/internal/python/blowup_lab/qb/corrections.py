"""
Homogeneous corrections S_k of the approximate profile.

With Theta = Q_b - Q = sum_h Theta_h, Theta_h = b_h T_h (h <= L) + S_h (h >= 2),
collecting the degree-k terms of the renormalized flow gives

    L S_k + F_k = 0,   F_k = E_{k-1} + (d-1)/(2y^2) P_k

    E_k = [k <= L] b_1 b_k (Lambda T_k - (2k - gamma) T_k)
          + b_1 Lambda S_k
          - sum_j [(2j - gamma) b_1 b_j - b_{j+1}] dS_k/db_j

    P_k = sum_{j=2..k} f^{(j)}(Q)/j! [Theta^j]_k,   f(x) = sin(2x)

so S_1 = 0 and S_k = -L^{-1} F_k for k = 2..L+2. Everything is carried as a
MonomialExpansion, which keeps dS_k/db_j exact.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from internal.python.blowup_lab.linop.kernel import TkFamily, invert_L, tail_exponent_fit
from internal.python.blowup_lab.linop.operators import OperatorContext
from internal.python.blowup_lab.models.errors import ConstructionError, ParameterError
from internal.python.blowup_lab.numerics.fitting import fit_power_law
from internal.python.blowup_lab.numerics.grid import GridFunction, dilation
from internal.python.blowup_lab.qb.monomials import MonomialExpansion, degree, scalar_law, unit
from internal.python.common.logger import default_logger

logger = default_logger.child("qb")

MAX_L = 4
TAIL_SLACK = 0.1
ORIGIN_SLACK = 0.5


@dataclass
class CorrectionFamily:
    """S_k and F_k for k = 0..L+2 (indices 0 and 1 are empty)."""
    L: int
    gamma: float
    S: List[MonomialExpansion]
    F: List[MonomialExpansion]
    measured_tail: Dict[str, float] = field(default_factory=dict)
    measured_origin: Dict[str, float] = field(default_factory=dict)

    @property
    def top(self) -> int:
        return self.L + 2

    def derivative_sum(self, k: int) -> MonomialExpansion:
        """sum_j dS_j/db_k over all stored corrections."""
        out = MonomialExpansion(self.S[0].grid, self.L)
        for Sj in self.S:
            out = out + Sj.derivative(k)
        return out

    def to_dict(self) -> Dict[str, object]:
        return {
            "L": self.L,
            "monomials": {str(k): [list(m) for m, _ in self.S[k]] for k in range(2, self.top + 1)},
            "measured_tail": self.measured_tail,
            "measured_origin": self.measured_origin,
        }


def taylor_factor(ctx: OperatorContext, j: int) -> GridFunction:
    """
    (d-1)/(2y^2) f^{(j)}(Q)/j! with f^{(j)}(Q) = 2^j sin(2Q + j pi/2).

    sin(2Q) and cos(2Q) come from the accurate representations on the pack.
    """
    pack = ctx.pack
    y = ctx.y
    phase = j % 4
    base = pack.sin2Q() if phase % 2 == 0 else pack.cos2Q()
    sign = 1.0 if phase in (0, 1) else -1.0
    vals = sign * 2.0 ** j / math.factorial(j) * (ctx.d - 1) / (2.0 * y ** 2) * base
    if phase % 2 == 0:
        return GridFunction(ctx.grid, vals, -1, -pack.gamma - 2.0)
    return GridFunction(ctx.grid, vals, -2, -2.0)


def _tail_term(tks: TkFamily, k: int, gamma: float) -> GridFunction:
    """Lambda T_k - (2k - gamma) T_k, from the cached analytic dilation."""
    Tk = tks[k]
    vals = dilation(Tk).values - (2.0 * k - gamma) * Tk.values
    return GridFunction(Tk.grid, vals, Tk.origin_exponent, Tk.tail_exponent)


def _theta_part(tks: TkFamily, S: List[MonomialExpansion], L: int, h: int) -> MonomialExpansion:
    part = S[h].copy() if h < len(S) else MonomialExpansion(tks[0].grid, L)
    if 1 <= h <= L:
        part.add_term(unit(L, h), tks[h])
    return part


def _measure(coeff: GridFunction) -> Dict[str, float]:
    grid = coeff.grid
    first = (grid.y <= grid.y_min * 10.0) & grid.interior(3)
    origin = fit_power_law(grid.y, np.abs(coeff.values), mask=first).exponent
    return {"tail": tail_exponent_fit(coeff), "origin": origin}


def build_Sk(ctx: OperatorContext, tks: TkFamily, L: int) -> CorrectionFamily:
    """
    Build S_2..S_{L+2} by inverting L on each coefficient of F_k.

    Raises ConstructionError when a coefficient grows faster than
    y^{2(k-1) - gamma} or vanishes slower than y^{2k+1} at the origin.
    """
    if not 1 <= L <= MAX_L:
        raise ParameterError("L must lie in 1..4", L=L)
    if tks.K < L:
        raise ParameterError("kernel iterates must reach T_L", K=tks.K, L=L)
    grid = ctx.grid
    gamma = ctx.pack.gamma
    top = L + 2
    empty = MonomialExpansion(grid, L)
    S: List[MonomialExpansion] = [empty.copy(), empty.copy()]
    F: List[MonomialExpansion] = [empty.copy(), empty.copy()]
    family = CorrectionFamily(L=L, gamma=gamma, S=S, F=F)

    for k in range(2, top + 1):
        prev = k - 1
        E = MonomialExpansion(grid, L)
        if prev <= L:
            m = list(unit(L, 1))
            m[prev - 1] += 1
            E.add_term(tuple(m), _tail_term(tks, prev, gamma))
        if len(S[prev]):
            E = E + S[prev].map(dilation).times_monomials({unit(L, 1): 1.0})
            for j in range(1, L + 1):
                dS = S[prev].derivative(j)
                if len(dS):
                    E = E + dS.times_monomials(scalar_law(L, gamma, j))

        lower = MonomialExpansion(grid, L)
        for h in range(1, k):
            lower = lower + _theta_part(tks, S, L, h)
        P = MonomialExpansion(grid, L)
        power = lower
        for j in range(2, k + 1):
            power = power.times(lower, max_degree=k)
            part = power.part(k)
            if len(part):
                P = P + part.times_function(taylor_factor(ctx, j))

        Fk = E + P
        if any(degree(m) != k for m in Fk.terms):
            raise ConstructionError("F_k holds a monomial of the wrong degree", k=k)

        Sk = MonomialExpansion(grid, L)
        for m, coeff in Fk:
            w = -invert_L(ctx, coeff)
            Sk.add_term(m, GridFunction(grid, w.values, 2 * k + 1, 2.0 * (k - 1) - gamma,
                                        dilation=w.dilation))
        _check_degree(family, k, Sk, gamma)
        F.append(Fk)
        S.append(Sk)
        logger.debug("built correction", {"k": k, "monomials": len(Sk)})

    logger.info("corrections ready", {"L": L, "top": top})
    return family


def _check_degree(family: CorrectionFamily, k: int, Sk: MonomialExpansion, gamma: float) -> None:
    tail_bound = 2.0 * (k - 1) - gamma + TAIL_SLACK
    origin_bound = 2.0 * k + 1 - ORIGIN_SLACK
    for m, coeff in Sk:
        if not np.any(coeff.values):
            continue
        if not coeff.is_finite():
            raise ConstructionError("correction is not finite", k=k, monomial=list(m))
        measured = _measure(coeff)
        key = f"S{k}{list(m)}"
        family.measured_tail[key] = measured["tail"]
        family.measured_origin[key] = measured["origin"]
        if measured["tail"] > tail_bound:
            raise ConstructionError("correction grows faster than its admissible degree",
                                    k=k, monomial=list(m), tail=measured["tail"], bound=tail_bound)
        if measured["origin"] < origin_bound:
            raise ConstructionError("correction lost its Taylor parity at the origin",
                                    k=k, monomial=list(m), origin=measured["origin"],
                                    bound=origin_bound)


def homogeneity_check(family: CorrectionFamily, b: np.ndarray, mu: float) -> float:
    """
    Largest relative defect of S_k(mu-scaled b) = mu^k S_k(b) over k.

    The scaled vector is (mu b_1, mu^2 b_2, ..., mu^L b_L).
    """
    b = np.asarray(b, dtype=float)
    scaled = b * mu ** np.arange(1, b.size + 1)
    worst = 0.0
    for k in range(2, family.top + 1):
        base = family.S[k].evaluate(b).values
        moved = family.S[k].evaluate(scaled).values
        ref = float(np.max(np.abs(base))) * mu ** k
        if ref == 0.0:
            continue
        worst = max(worst, float(np.max(np.abs(moved - mu ** k * base))) / ref)
    return worst
