"""Slowly modulated approximate profile Q_b, its corrections and residual."""

from .approximate_profile import (
    ApproximateProfile,
    ResidualReport,
    ScalingReport,
    assemble_Qb,
    b_on_explicit_curve,
    compute_Psib,
    consistent_residual,
    cutoff_rate,
    localization_radii,
    mod_vector,
    parameter_directions,
    residual_scaling,
    stencil_residual,
)
from .corrections import CorrectionFamily, build_Sk, homogeneity_check, taylor_factor
from .monomials import MonomialExpansion, degree, multi_indices, scalar_law, unit

__all__ = [
    "ApproximateProfile",
    "CorrectionFamily",
    "MonomialExpansion",
    "ResidualReport",
    "ScalingReport",
    "assemble_Qb",
    "b_on_explicit_curve",
    "build_Sk",
    "compute_Psib",
    "consistent_residual",
    "cutoff_rate",
    "degree",
    "homogeneity_check",
    "localization_radii",
    "mod_vector",
    "multi_indices",
    "parameter_directions",
    "residual_scaling",
    "scalar_law",
    "stencil_residual",
    "taylor_factor",
    "unit",
]
