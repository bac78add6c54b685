"""Linearized operator calculus: factorization, inversion, kernel iterates, Phi_M."""

from .coercivity import coercivity_probe, coercivity_ratio, project_out
from .kernel import TkFamily, generate_Tk, invert_L, tail_exponent_fit
from .operators import (
    OperatorContext,
    apply_A,
    apply_Astar,
    apply_L,
    apply_Lk,
    apply_Lstil,
    lambda_commutator_check,
    make_context,
    operator_scale,
    relative_residual,
)
from .orthogonality import (
    PhiMDirection,
    L_powers,
    L_powers_of_phi,
    build_PhiM,
    cutoff,
    cutoff_derivative,
    expected_identity,
    identity_matrix,
    localized,
    orthogonality_defects,
)

__all__ = [
    "L_powers",
    "L_powers_of_phi",
    "OperatorContext",
    "PhiMDirection",
    "TkFamily",
    "apply_A",
    "apply_Astar",
    "apply_L",
    "apply_Lk",
    "apply_Lstil",
    "build_PhiM",
    "coercivity_probe",
    "coercivity_ratio",
    "cutoff",
    "cutoff_derivative",
    "generate_Tk",
    "expected_identity",
    "identity_matrix",
    "invert_L",
    "lambda_commutator_check",
    "localized",
    "make_context",
    "operator_scale",
    "orthogonality_defects",
    "project_out",
    "relative_residual",
    "tail_exponent_fit",
]
