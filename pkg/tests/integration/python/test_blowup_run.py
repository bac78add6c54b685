"""
End-to-end simulation run in d = 8 followed by plotdata on its output.
"""

import json

import pandas as pd
import pytest

from internal.python.blowup_lab.cli import EXIT_OK, LOGLOG_NAME
from internal.python.blowup_lab.sim.runner import RATE_REPORT_NAME, TRAJECTORY_NAME


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.resource_intensive
def test_stable_blowup_rate_d8(cli, tmp_path, read_manifest):
    # Arrange
    config = tmp_path / "d8.cfg"
    config.write_text(
        "# stable regime, one modulation parameter\n"
        "d = 8\n"
        "ell = 1\n"
        "L = 1\n"
        "s0 = 250\n"
        "lambda_min = 1e-6\n"
        "sample_every = 10\n"
        "# room to reach lambda_min\n"
        "wall_clock = 3600\n"
    )
    out = tmp_path / "run"

    # Act
    code = cli(["simulate", "--config", config, "--seed", "3", "--out", out])

    # Assert
    assert code == EXIT_OK
    manifest = read_manifest(out)
    assert manifest["config"]["seed"] == 3
    report = json.loads((out / RATE_REPORT_NAME).read_text())
    trajectory = pd.read_csv(out / TRAJECTORY_NAME)
    assert list(trajectory.columns[:4]) == ["t", "s", "lambda", "b_1"]
    assert report["status"] == "blowup", report["reason"]

    assert report["exponent"] == pytest.approx(report["expected_exponent"], rel=0.05)
    assert report["b1_s"] == pytest.approx(report["c1"], rel=0.05)
    assert all(check["passed"] for check in manifest["checks"])

    assert cli(["plotdata", out]) == EXIT_OK
    assert (out / LOGLOG_NAME).exists()
