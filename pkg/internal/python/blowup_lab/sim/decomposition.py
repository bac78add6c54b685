"""
Modulation decomposition of a gauge-frame profile.

Given w, find (mu, b) such that q(z) = w(mu z) - Q~_b(z) satisfies

    <q, L^i Phi_M> = 0,   i = 0..L

by damped Newton iteration in p = (log mu, b_1..b_L). Residuals are scaled
by <chi_M LamQ, LamQ>, which makes the Jacobian at (mu, b) = (1, 0) a
signed identity.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from internal.python.blowup_lab.linop.kernel import TkFamily
from internal.python.blowup_lab.linop.operators import OperatorContext
from internal.python.blowup_lab.linop.orthogonality import PhiMDirection, L_powers_of_phi
from internal.python.blowup_lab.models.errors import DecompositionError
from internal.python.blowup_lab.numerics.grid import GridFunction, inner_product
from internal.python.blowup_lab.qb.approximate_profile import (
    ApproximateProfile,
    assemble_Qb,
    cutoff_rate,
    parameter_directions,
)
from internal.python.blowup_lab.qb.corrections import CorrectionFamily
from internal.python.common.logger import default_logger

logger = default_logger.child("sim")

MAX_HALVINGS = 5


@dataclass
class DecompositionResult:
    mu: float
    b: np.ndarray
    q: GridFunction
    profile: ApproximateProfile
    iterations: int
    residual: float

    def to_dict(self):
        return {"mu": self.mu, "b": self.b.tolist(), "iterations": self.iterations,
                "residual": self.residual}


def pullback(values: np.ndarray, x: np.ndarray, log_mu: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    w(mu z) and (Lambda w)(mu z) on the nodes z, from a cubic spline in x.

    Beyond y_max the profile is held at its last value.
    """
    spline = CubicSpline(x, values, extrapolate=True)
    xs = x + log_mu
    out = spline(xs)
    lam = spline(xs, 1)
    beyond = xs > x[-1]
    out[beyond] = values[-1]
    lam[beyond] = 0.0
    return out, lam


class ModulationDecomposer:
    """Newton projection onto the modulated profile family."""

    def __init__(self, ctx: OperatorContext, tks: TkFamily, corrections: CorrectionFamily,
                 phi: PhiMDirection, eta: float, tol: float, maxiter: int):
        self.ctx = ctx
        self.tks = tks
        self.corrections = corrections
        self.phi = phi
        self.eta = eta
        self.tol = tol
        self.maxiter = maxiter
        self.L = corrections.L
        self.directions: List[GridFunction] = L_powers_of_phi(phi, self.L)
        self.cap = 0.5 * ctx.grid.y_max

    def profile(self, b: Sequence[float]) -> ApproximateProfile:
        return assemble_Qb(self.ctx, self.tks, self.corrections, b, self.eta, cap=self.cap)

    def _project(self, values: np.ndarray) -> np.ndarray:
        f = GridFunction(self.ctx.grid, values, 1, 0.0)
        return np.array([inner_product(f, g) for g in self.directions]) / self.phi.chi_norm

    def _remainder(self, w: np.ndarray, p: np.ndarray):
        pulled, lam = pullback(w, self.ctx.grid.x, p[0])
        profile = self.profile(p[1:])
        return pulled - profile.Qb_localized.values, lam, profile

    def jacobian(self, lam_w: np.ndarray, profile: ApproximateProfile) -> np.ndarray:
        """Columns d r / d log mu and d r / d b_j."""
        J = np.empty((self.L + 1, self.L + 1))
        J[:, 0] = self._project(lam_w)
        rate = cutoff_rate(profile)
        for j, D in enumerate(parameter_directions(profile), start=1):
            col = profile.chi * D.values
            if j == 1:
                col = col + rate * profile.Theta.values
            J[:, j] = -self._project(col)
        return J

    def decompose(self, w: np.ndarray, mu0: float = 1.0,
                  b0: Optional[Sequence[float]] = None) -> DecompositionResult:
        p = np.empty(self.L + 1)
        p[0] = np.log(mu0)
        p[1:] = np.zeros(self.L) if b0 is None else np.asarray(b0, dtype=float)

        q, lam, profile = self._remainder(w, p)
        r = self._project(q)
        norm = float(np.max(np.abs(r)))
        for it in range(self.maxiter + 1):
            if norm <= self.tol:
                return DecompositionResult(
                    mu=float(np.exp(p[0])), b=p[1:].copy(),
                    q=GridFunction(self.ctx.grid, q, 1, 0.0),
                    profile=profile, iterations=it, residual=norm)
            if it == self.maxiter:
                break
            try:
                step = np.linalg.solve(self.jacobian(lam, profile), -r)
            except np.linalg.LinAlgError as exc:
                raise DecompositionError("singular decomposition Jacobian", b=p[1:].tolist()) from exc
            scale = 1.0
            for _ in range(MAX_HALVINGS + 1):
                trial = p + scale * step
                q_t, lam_t, prof_t = self._remainder(w, trial)
                r_t = self._project(q_t)
                norm_t = float(np.max(np.abs(r_t)))
                if np.isfinite(norm_t) and norm_t < norm:
                    break
                scale *= 0.5
            if not np.isfinite(norm_t):
                raise DecompositionError("decomposition left the admissible tube",
                                         b=trial[1:].tolist(), mu=float(np.exp(trial[0])))
            p, q, lam, profile, r, norm = trial, q_t, lam_t, prof_t, r_t, norm_t
            logger.debug("newton step", {"iteration": it + 1, "residual": norm, "scale": scale})
        raise DecompositionError("modulation Newton did not converge", residual=norm,
                                 iterations=self.maxiter, b=p[1:].tolist())
