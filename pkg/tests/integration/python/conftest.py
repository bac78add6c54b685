"""
Integration test configuration: the CLI runner and synthetic run directories.
"""

import json
from pathlib import Path
from typing import Callable, List

import numpy as np
import pandas as pd
import pytest

from internal.python.blowup_lab.cli import main
from internal.python.blowup_lab.models.manifest import MANIFEST_NAME
from internal.python.blowup_lab.modes.system import make_mode_system
from internal.python.blowup_lab.sim.report import rate_report
from internal.python.blowup_lab.sim.runner import FLOAT_FORMAT, RATE_REPORT_NAME, TRAJECTORY_NAME
from internal.python.blowup_lab.sim.state import STATUS_BLOWUP


@pytest.fixture
def cli() -> Callable[[List[str]], int]:
    """Run blowup-lab in-process and return its exit code."""
    def _run(argv: List[str]) -> int:
        return main([str(a) for a in argv])
    return _run


@pytest.fixture
def read_manifest() -> Callable[[Path], dict]:
    def _read(out_dir: Path) -> dict:
        return json.loads((Path(out_dir) / MANIFEST_NAME).read_text())
    return _read


@pytest.fixture
def synthetic_run_dir(tmp_path) -> Path:
    """
    A finished d = 8 run whose trajectory is an exact power law,
    lambda = 1e-2 (T - t)^p with T = 100.
    """
    system = make_mode_system(8, 1)
    c1, p = system.c[0], system.t_exponent()
    s = 20.0 * 2.0 ** (np.arange(113) / 16.0)
    lam = 0.1 * (s / 20.0) ** -c1
    gap = (lam / 1e-2) ** (1.0 / p)
    frame = pd.DataFrame({
        "t": 100.0 - gap,
        "s": s,
        "lambda": lam,
        "b_1": c1 / s,
        "E": np.ones_like(s),
        "E_2": np.ones_like(s),
        "grad_max": 3.0 / np.sqrt(gap),
        "mu": np.ones_like(s),
    })
    run_dir = tmp_path / "run"
    run_dir.mkdir()
    frame.to_csv(run_dir / TRAJECTORY_NAME, index=False, float_format=FLOAT_FORMAT)
    report = rate_report(frame, system, STATUS_BLOWUP, "lambda reached 1e-06")
    (run_dir / RATE_REPORT_NAME).write_text(json.dumps(report, indent=2, default=float))
    return run_dir
