"""Dynamically rescaled PDE simulation, modulation decomposition and rate reports."""

from .decomposition import DecompositionResult, ModulationDecomposer, pullback
from .report import estimate_blowup_time, fit_rate, rate_report, type_ii_growth
from .runner import RunResult, Simulation, run_blowup, write_outputs
from .state import (
    STATUS_BLOWUP,
    STATUS_BUDGET,
    STATUS_FAILED,
    STATUS_NO_BLOWUP,
    STATUS_RUNNING,
    RunOutcome,
    SimState,
    energy_allowance,
)
from .stepper import LinearlyImplicitStepper, StepResult, difference_matrices, rezone

__all__ = [
    "DecompositionResult",
    "LinearlyImplicitStepper",
    "ModulationDecomposer",
    "RunOutcome",
    "RunResult",
    "STATUS_BLOWUP",
    "STATUS_BUDGET",
    "STATUS_FAILED",
    "STATUS_NO_BLOWUP",
    "STATUS_RUNNING",
    "SimState",
    "Simulation",
    "StepResult",
    "difference_matrices",
    "energy_allowance",
    "estimate_blowup_time",
    "fit_rate",
    "pullback",
    "rate_report",
    "rezone",
    "run_blowup",
    "type_ii_growth",
    "write_outputs",
]
