"""Finite-dimensional modulation dynamics: explicit solutions, spectrum, rates, shooting."""

from .dynamics import (
    ModeTrajectory,
    data_from_modes,
    deviations,
    instability_experiment,
    integrate_system,
    shoot_unstable,
    shrinking_bound,
    shrinking_set_check,
    trapped_trajectory,
)
from .linearization import LinearizationMatrix, build_Al, closed_form_spectrum
from .system import (
    ModeSystem,
    explicit_coefficients,
    explicit_residual,
    explicit_solution,
    law,
    make_mode_system,
    system_residual,
)

__all__ = [
    "LinearizationMatrix",
    "ModeSystem",
    "ModeTrajectory",
    "build_Al",
    "closed_form_spectrum",
    "data_from_modes",
    "deviations",
    "explicit_coefficients",
    "explicit_residual",
    "explicit_solution",
    "instability_experiment",
    "integrate_system",
    "law",
    "make_mode_system",
    "shoot_unstable",
    "shrinking_bound",
    "shrinking_set_check",
    "system_residual",
    "trapped_trajectory",
]
