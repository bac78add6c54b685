"""Ground state Q, its asymptotic constants and derived background fields."""

from .ground_state import (
    ProfilePack,
    build_Gamma,
    energy,
    sin_minus_id,
    sine_increment,
    fit_tail,
    gamma_exponent,
    gamma_prime,
    lamq_tail_exponent,
    potential_identity_residual,
    series_coefficient,
    solve_Q,
    spectral_params,
    wronskian_residual,
)

__all__ = [
    "ProfilePack",
    "build_Gamma",
    "energy",
    "sin_minus_id",
    "sine_increment",
    "fit_tail",
    "gamma_exponent",
    "gamma_prime",
    "lamq_tail_exponent",
    "potential_identity_residual",
    "series_coefficient",
    "solve_Q",
    "spectral_params",
    "wronskian_residual",
]
