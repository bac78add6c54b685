"""
Configuration models for blowup-lab experiments.

SimConfig is validated with pydantic since it is read from user-supplied
key=value files; the smaller per-subcommand configs are plain dataclasses.
"""

import math
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, root_validator, validator

from internal.python.blowup_lab.models.errors import FileError, ParameterError, ParseError

load_dotenv()


def default_out_dir() -> str:
    """Output directory from BLOWUP_LAB_OUT, or ./runs."""
    return os.environ.get("BLOWUP_LAB_OUT", "runs")


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("BLOWUP_LAB_THREADS", "1")))
    except ValueError:
        return 1


class GaugeMode(str, Enum):
    """How the scale λ is tracked while stepping."""
    FULL_MODULATION = "full_modulation"  # λ_s/λ = −b_1 from the per-step decomposition
    POSTHOC_FIT = "posthoc_fit"  # frozen frame with integer-cell rezoning, decomposed at samples


def _gamma(d: int) -> float:
    return 0.5 * (d - 2 - math.sqrt(d * d - 8 * d + 8))


class SimConfig(BaseModel):
    """Parameters of one dynamically rescaled PDE run."""

    d: int = Field(8, description="space dimension")
    ell: int = Field(1, description="blowup regime index")
    L: int = Field(1, description="number of modulation parameters b_1..b_L")
    M: float = Field(4.0, description="localization radius of the orthogonality direction")
    eta: float = Field(0.05, description="B_1 = B_0^(1+eta)")

    y_min: float = 1e-3
    y_max: float = 1e4
    n: int = 2048

    s0: float = Field(250.0, description="initial renormalized time; b_1(s0) = c_1/s0")
    lambda0: float = 1.0
    q0_amplitude: float = Field(0.0, description="amplitude of the localized bump added to the data")
    q0_center: float = 1.0
    q0_width: float = 0.5

    ds0: float = 0.05
    ds_max: float = 5.0
    solver_tol: float = 1e-6
    max_rejects: int = 25
    energy_tol: float = 1e-9
    newton_tol: float = 1e-9
    newton_maxiter: int = 25
    cfl: float = 0.5

    gauge_mode: GaugeMode = GaugeMode.FULL_MODULATION
    lambda_min: float = 1e-6
    s_max: float = 1e7
    max_steps: int = 2_000_000
    wall_clock: float = 600.0
    sample_every: int = 10
    frame_every: int = 0

    seed: int = 0

    class Config:
        use_enum_values = False
        validate_assignment = True

    @validator("d")
    def _check_d(cls, v: int) -> int:
        if v < 7:
            raise ValueError("d must be >= 7")
        return v

    @validator("n")
    def _check_n(cls, v: int) -> int:
        if v < 64:
            raise ValueError("n must be >= 64")
        return v

    @validator("eta")
    def _check_eta(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        return v

    @root_validator(skip_on_failure=True)
    def _check_ranges(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        d, ell, L = values["d"], values["ell"], values["L"]
        if 2 * ell <= _gamma(d):
            raise ValueError("regime requires 2*ell > gamma")
        if not ell <= L <= 4:
            raise ValueError("need ell <= L <= 4")
        if not 0.0 < values["y_min"] < 1.0 < values["y_max"]:
            raise ValueError("need 0 < y_min < 1 < y_max")
        if 2.0 * values["M"] >= values["y_max"]:
            raise ValueError("2M must stay below y_max")
        if values["s0"] <= 0 or values["lambda0"] <= 0:
            raise ValueError("s0 and lambda0 must be positive")
        return values

    def to_dict(self) -> Dict[str, Any]:
        data = self.dict()
        data["gauge_mode"] = self.gauge_mode.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimConfig":
        try:
            return cls(**data)
        except ValidationError as exc:
            raise ParameterError(f"invalid simulation config: {exc}") from exc

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SimConfig":
        """
        Read a line-oriented key=value file.

        Blank lines and '#' comments are ignored; unknown keys and malformed
        lines raise ParseError naming the line.
        """
        path = Path(path)
        if not path.is_file():
            raise FileError(f"config file not found: {path}", path=str(path))
        known = set(cls.__fields__)
        data: Dict[str, Any] = {}
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value", line=lineno)
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ParseError(f"{path}:{lineno}: unknown key '{key}'", line=lineno)
            data[key] = value
        return cls.from_dict(data)


@dataclass
class ProfileConfig:
    """Grid for a ground-state solve."""
    d: int = 7
    y_min: float = 1e-4
    y_max: float = 1e4
    n: int = 2048

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ProfileConfig":
        return cls(
            d=int(data.get("d", 7)),
            y_min=float(data.get("y_min", 1e-4)),
            y_max=float(data.get("y_max", 1e4)),
            n=int(data.get("n", 2048)),
        )


@dataclass
class OperatorConfig:
    """Kernel iterates, orthogonality direction and coercivity sampling."""
    d: int = 8
    K: int = 4
    M: float = 40.0
    L: int = 3
    y_min: float = 1e-3
    y_max: float = 1e3
    n: int = 4096
    samples: int = 64
    k_coercivity: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OperatorConfig":
        k = data.get("k_coercivity")
        return cls(
            d=int(data.get("d", 8)),
            K=int(data.get("K", 4)),
            M=float(data.get("M", 40.0)),
            L=int(data.get("L", 3)),
            y_min=float(data.get("y_min", 1e-3)),
            y_max=float(data.get("y_max", 1e3)),
            n=int(data.get("n", 4096)),
            samples=int(data.get("samples", 64)),
            k_coercivity=None if k is None else int(k),
        )


@dataclass
class QbConfig:
    """Approximate profile construction and residual scaling."""
    d: int = 8
    ell: int = 1
    L: int = 2
    b1: float = 1e-3
    eta: float = 0.05
    scaling_eta: float = 0.35
    b1_window: List[float] = field(default_factory=lambda: [1e-3, 2e-3, 4e-3, 1e-2])
    M: float = 2.0
    y_min: float = 1e-3
    y_max: float = 1e3
    n: int = 2048

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QbConfig":
        return cls(
            d=int(data.get("d", 8)),
            ell=int(data.get("ell", 1)),
            L=int(data.get("L", 2)),
            b1=float(data.get("b1", 1e-3)),
            eta=float(data.get("eta", 0.05)),
            scaling_eta=float(data.get("scaling_eta", 0.35)),
            b1_window=[float(v) for v in data.get("b1_window", [1e-3, 2e-3, 4e-3, 1e-2])],
            M=float(data.get("M", 2.0)),
            y_min=float(data.get("y_min", 1e-3)),
            y_max=float(data.get("y_max", 1e3)),
            n=int(data.get("n", 2048)),
        )


@dataclass
class ModesConfig:
    """Finite-dimensional b-system experiments."""
    d: int = 7
    ell: int = 2
    L: int = 3
    s0: float = 20.0
    decades: float = 3.0
    eps: float = 1e-4
    eta: float = 0.05

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModesConfig":
        return cls(
            d=int(data.get("d", 7)),
            ell=int(data.get("ell", 2)),
            L=int(data.get("L", 3)),
            s0=float(data.get("s0", 20.0)),
            decades=float(data.get("decades", 3.0)),
            eps=float(data.get("eps", 1e-4)),
            eta=float(data.get("eta", 0.05)),
        )
