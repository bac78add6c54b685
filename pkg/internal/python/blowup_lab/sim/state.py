"""
State of a dynamically rescaled run.

The solution is stored in the gauge frame: u(r, t) = w(r / lambda_g, s_g).
The decomposition then writes w(mu z) = Q~_b(z) + q(z), so the true scale
is lambda = lambda_g mu and the renormalized time advances by ds_g / mu^2.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Union

import numpy as np

from internal.python.blowup_lab.numerics.grid import GridFunction

STATUS_RUNNING = "running"
STATUS_BLOWUP = "blowup"
STATUS_NO_BLOWUP = "no_blowup"
STATUS_BUDGET = "budget_exhausted"
STATUS_FAILED = "failed"


def energy_allowance(energy_tol: float, energy: Union[float, np.ndarray],
                     steps: int = 1) -> Union[float, np.ndarray]:
    """
    Largest tolerated energy increase over `steps` accepted steps.

    energy_tol * steps * max(1, |E|); E may be an array of sampled energies.
    """
    return energy_tol * steps * np.maximum(1.0, np.abs(energy))


@dataclass
class SimState:
    """One accepted time level."""
    w: GridFunction
    q: GridFunction
    lam_gauge: float
    mu: float
    b: np.ndarray
    s: float  # renormalized time of the true scale
    s_gauge: float
    t: float
    step: int = 0
    ds: float = 0.0
    energy: float = float("nan")
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def lam(self) -> float:
        return self.lam_gauge * self.mu

    @property
    def b1(self) -> float:
        return float(self.b[0])

    def advanced(self, **changes: Any) -> "SimState":
        return replace(self, **changes)

    def summary(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "t": self.t,
            "s": self.s,
            "lambda": self.lam,
            "mu": self.mu,
            "b": self.b.tolist(),
            "ds": self.ds,
            "energy": self.energy,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass
class RunOutcome:
    """How a run ended, for the rate report."""
    status: str = STATUS_RUNNING
    reason: Optional[str] = None

    def finish(self, status: str, reason: str) -> None:
        self.status = status
        self.reason = reason
