"""
Error models for blowup-lab.

Every failure raised by the library carries an ErrorType classification and
a details dict so that the command layer can map it to an exit code and the
manifest can record it.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional


class ErrorType(str, Enum):
    """Classification of library failures."""
    PARAMETER = "parameter"
    DOMAIN = "domain"
    INTERNAL = "internal"
    PROFILE = "profile"
    TAIL_FIT = "tail_fit"
    INVERSION = "inversion"
    CONSTRUCTION = "construction"
    RANGE = "range"
    STIFFNESS = "stiffness"
    SOLVER_FAULT = "solver_fault"
    DECOMPOSITION = "decomposition"
    SHOOTING = "shooting"
    USAGE = "usage"
    FILE = "file"
    PARSE = "parse"
    CHECK = "check"


class BlowupLabError(Exception):
    """Base class for all errors raised by blowup-lab."""

    error_type: ErrorType = ErrorType.INTERNAL

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error_type": self.error_type.value,
            "message": self.message,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


class ParameterError(BlowupLabError):
    """Invalid parameter ranges."""
    error_type = ErrorType.PARAMETER


class DomainError(BlowupLabError):
    """Dimension outside the covered regime."""
    error_type = ErrorType.DOMAIN


class InternalError(BlowupLabError):
    """An invariant that cannot fail did."""
    error_type = ErrorType.INTERNAL


class ProfileError(BlowupLabError):
    """Ground state integration failed."""
    error_type = ErrorType.PROFILE


class TailFitError(BlowupLabError):
    """Tail fit residual above threshold."""
    error_type = ErrorType.TAIL_FIT


class InversionError(BlowupLabError):
    """Inversion of the linearized operator produced non-finite values."""
    error_type = ErrorType.INVERSION


class ConstructionError(BlowupLabError):
    """Correction profile or orthogonality direction could not be built."""
    error_type = ErrorType.CONSTRUCTION


class RangeError(BlowupLabError):
    """Parameters too large for the grid."""
    error_type = ErrorType.RANGE


class StiffnessError(BlowupLabError):
    """Time step rejected too many times in a row."""
    error_type = ErrorType.STIFFNESS


class SolverFault(BlowupLabError):
    """Energy increased beyond tolerance."""
    error_type = ErrorType.SOLVER_FAULT


class DecompositionError(BlowupLabError):
    """Newton iteration for the modulation parameters diverged."""
    error_type = ErrorType.DECOMPOSITION


class ShootingError(BlowupLabError):
    """Bisection could not bracket the trapped initial value."""
    error_type = ErrorType.SHOOTING


class UsageError(BlowupLabError):
    """Bad command-line usage."""
    error_type = ErrorType.USAGE


class FileError(BlowupLabError):
    """Missing or unreadable inputs."""
    error_type = ErrorType.FILE


class ParseError(BlowupLabError):
    """Malformed config or CSV input."""
    error_type = ErrorType.PARSE


class CheckFailure(BlowupLabError):
    """A numerical acceptance check failed."""
    error_type = ErrorType.CHECK


@dataclass
class CheckResult:
    """Outcome of one named numerical check."""
    name: str
    passed: bool
    value: Optional[float] = None
    expected: Optional[float] = None
    tolerance: Optional[float] = None
    message: str = ""
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": _jsonable(self.value),
            "expected": _jsonable(self.expected),
            "tolerance": self.tolerance,
            "message": self.message,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(value: Any) -> Any:
    """Coerce numpy scalars and arrays into plain JSON values."""
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value
