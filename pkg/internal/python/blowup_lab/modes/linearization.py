"""
Linearization of the b-system around the explicit solution.

Writing b_k = (c_k + U_k) / s^k for k <= ell gives s U_s = A_ell U + O(|U|^2)
with

    a_11 = gamma (ell - 1)/(2 ell - gamma) - (2 - gamma) c_1
    a_ii = gamma (ell - i)/(2 ell - gamma)          i >= 2
    a_{i,i+1} = 1
    a_{i,1} = -(2i - gamma) c_i                     i >= 2

and spectrum {-1, 2 gamma/(2 ell - gamma), ..., ell gamma/(2 ell - gamma)}.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy import linalg

from internal.python.blowup_lab.modes.system import explicit_coefficients


@dataclass
class LinearizationMatrix:
    """A_ell with its eigen-decomposition; V = P U diagonalizes the flow."""
    ell: int
    gamma: float
    A: np.ndarray
    eigenvalues: np.ndarray
    R: np.ndarray  # right eigenvectors as columns
    P: np.ndarray  # R^{-1}

    def expected_spectrum(self) -> np.ndarray:
        return closed_form_spectrum(self.gamma, self.ell)

    @property
    def unstable_count(self) -> int:
        return int(np.sum(self.eigenvalues > 0))

    def to_dict(self) -> Dict[str, object]:
        return {
            "ell": self.ell,
            "gamma": self.gamma,
            "A": self.A.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }


def closed_form_spectrum(gamma: float, ell: int) -> np.ndarray:
    rest = [k * gamma / (2.0 * ell - gamma) for k in range(2, ell + 1)]
    return np.sort(np.array([-1.0] + rest))


def build_Al(gamma: float, ell: int) -> LinearizationMatrix:
    """Assemble A_ell and diagonalize it with a dense nonsymmetric solver."""
    c = explicit_coefficients(gamma, ell, ell)
    A = np.zeros((ell, ell))
    for i in range(1, ell + 1):
        A[i - 1, i - 1] = gamma * (ell - i) / (2.0 * ell - gamma)
        if i < ell:
            A[i - 1, i] = 1.0
        if i >= 2:
            A[i - 1, 0] = -(2.0 * i - gamma) * c[i - 1]
    A[0, 0] -= (2.0 - gamma) * c[0]

    w, R = linalg.eig(A)
    order = np.argsort(w.real)
    w, R = w[order].real, R[:, order].real
    P = linalg.inv(R)
    return LinearizationMatrix(ell=ell, gamma=gamma, A=A, eigenvalues=w, R=R, P=P)
