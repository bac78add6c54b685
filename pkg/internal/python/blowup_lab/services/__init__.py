"""Service layer: the verification suite behind verify-all."""

from .verification_service import (
    DEFAULT_DIMENSIONS,
    FAULTS,
    OperatorArtifacts,
    QbArtifacts,
    VerificationReport,
    VerificationService,
)

__all__ = [
    "DEFAULT_DIMENSIONS",
    "FAULTS",
    "OperatorArtifacts",
    "QbArtifacts",
    "VerificationReport",
    "VerificationService",
]
