"""
Smooth cutoffs and the orthogonality direction Phi_M.

Phi_M = sum_k c_k L^k (chi_M LamQ) with c_0 = 1 and the remaining
coefficients fixed by <Phi_M, T_k> = 0 for 1 <= k <= L.
"""

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from internal.python.blowup_lab.linop.kernel import TkFamily
from internal.python.blowup_lab.linop.operators import OperatorContext, apply_L
from internal.python.blowup_lab.models.errors import ConstructionError, ParameterError
from internal.python.blowup_lab.numerics.grid import GridFunction, inner_product


def _psi(t: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)


def cutoff(z: np.ndarray) -> np.ndarray:
    """C-infinity cutoff: 1 on [0, 1], 0 on [2, inf), monotone in between."""
    z = np.asarray(z, dtype=float)
    a, b = _psi(2.0 - z), _psi(z - 1.0)
    return a / (a + b)


def cutoff_derivative(z: np.ndarray) -> np.ndarray:
    """d chi / dz."""
    z = np.asarray(z, dtype=float)
    a, b = _psi(2.0 - z), _psi(z - 1.0)
    inside = (z > 1.0) & (z < 2.0)
    safe = np.where(inside, z, 1.5)
    da = -_psi(2.0 - safe) / (2.0 - safe) ** 2
    db = _psi(safe - 1.0) / (safe - 1.0) ** 2
    denom = (a + b) ** 2
    return np.where(inside, (da * b - a * db) / np.where(inside, denom, 1.0), 0.0)


def localized(f: GridFunction, radius: float) -> GridFunction:
    """chi(y / radius) f."""
    return GridFunction(f.grid, cutoff(f.grid.y / radius) * f.values, f.origin_exponent, 0.0)


@dataclass
class PhiMDirection:
    """Orthogonality direction and the iterates it was assembled from."""
    M: float
    L: int
    c: np.ndarray
    Phi: GridFunction
    phis: List[GridFunction]
    chi_norm: float  # <chi_M LamQ, LamQ>
    recurrence_c: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> Dict[str, object]:
        return {
            "M": self.M,
            "L": self.L,
            "c": self.c.tolist(),
            "recurrence_c": self.recurrence_c.tolist(),
            "chi_norm": self.chi_norm,
        }


def L_powers(ctx: OperatorContext, f: GridFunction, top: int) -> List[GridFunction]:
    """[f, L f, ..., L^top f]."""
    out = [f]
    for _ in range(top):
        out.append(apply_L(ctx, out[-1]))
    return out


def build_PhiM(ctx: OperatorContext, tks: TkFamily, M: float, L: int) -> PhiMDirection:
    """
    Assemble Phi_M.

    The coefficients solve the discrete moment system <Phi_M, T_k> = 0,
    k = 1..L, which is triangular in exact arithmetic and agrees with the
    scalar recurrence; the recurrence values are kept for comparison.
    """
    grid = ctx.grid
    if 2.0 * M > grid.y_max:
        raise ParameterError("support of Phi_M exceeds the grid", M=M, y_max=grid.y_max)
    if L > tks.K:
        raise ParameterError("need L <= K", L=L, K=tks.K)
    if M <= 0:
        raise ParameterError("M must be positive", M=M)

    lamq = tks[0]
    phi0 = localized(lamq, M)
    chi_norm = inner_product(phi0, lamq)
    if not chi_norm > 0.0:
        raise ConstructionError("<chi_M LamQ, LamQ> vanished", M=M)

    phis = L_powers(ctx, phi0, 2 * L)
    G = np.array([[inner_product(phis[j], tks[k]) for j in range(L + 1)] for k in range(1, L + 1)])
    c = np.ones(L + 1)
    if L > 0:
        c[1:] = np.linalg.solve(G[:, 1:], -G[:, 0])

    rec = np.ones(L + 1)
    for k in range(1, L + 1):
        acc = sum(rec[j] * G[k - 1, j] for j in range(k))
        rec[k] = (-1) ** (k + 1) * acc / chi_norm

    Phi_vals = sum(c[j] * phis[j].values for j in range(L + 1))
    Phi = GridFunction(grid, np.asarray(Phi_vals, dtype=float), 1, 0.0)
    return PhiMDirection(M=M, L=L, c=c, Phi=Phi, phis=phis, chi_norm=chi_norm, recurrence_c=rec)


def L_powers_of_phi(phi: PhiMDirection, top: int) -> List[GridFunction]:
    """L^i Phi_M for i = 0..top, composed from the stored iterates."""
    if top > phi.L:
        raise ParameterError("stored iterates only reach L^L Phi_M", top=top, L=phi.L)
    out = []
    for i in range(top + 1):
        vals = sum(phi.c[j] * phi.phis[i + j].values for j in range(phi.L + 1))
        out.append(GridFunction(phi.Phi.grid, np.asarray(vals, dtype=float), 1, 0.0))
    return out


def orthogonality_defects(phi: PhiMDirection, tks: TkFamily) -> List[float]:
    """|<Phi_M, T_k>| / <Phi_M, LamQ> for k = 1..L."""
    ref = inner_product(phi.Phi, tks[0])
    return [abs(inner_product(phi.Phi, tks[k])) / abs(ref) for k in range(1, phi.L + 1)]


def identity_matrix(phi: PhiMDirection, tks: TkFamily) -> np.ndarray:
    """
    Matrix of <L^i T_k, Phi_M> for 0 <= i, k <= L, normalized by <chi_M LamQ, LamQ>.

    Uses L T_{k+1} = -T_k and L T_0 = 0, so L^i T_k = (-1)^i T_{k-i} for
    i <= k and vanishes otherwise; every entry is a single quadrature
    <T_j, Phi_M>. Expected: (-1)^k on the diagonal and zero elsewhere.
    """
    if phi.L > tks.K:
        raise ParameterError("need L <= K", L=phi.L, K=tks.K)
    moments = [inner_product(tks[j], phi.Phi) / phi.chi_norm for j in range(phi.L + 1)]
    out = np.zeros((phi.L + 1, phi.L + 1))
    for i in range(phi.L + 1):
        for k in range(i, phi.L + 1):
            out[i, k] = (-1) ** i * moments[k - i]
    return out


def expected_identity(L: int) -> np.ndarray:
    """diag((-1)^k), k = 0..L."""
    return np.diag([(-1.0) ** k for k in range(L + 1)])
