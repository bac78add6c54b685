"""
Unit tests for configuration models, error models, the run manifest and the logger.
"""

import json

import numpy as np
import pytest

from internal.python.blowup_lab.models.config import (
    GaugeMode,
    OperatorConfig,
    ProfileConfig,
    QbConfig,
    SimConfig,
    default_out_dir,
    default_threads,
)
from internal.python.blowup_lab.models.errors import (
    CheckResult,
    ErrorType,
    FileError,
    ParameterError,
    ParseError,
)
from internal.python.blowup_lab.models.manifest import (
    MANIFEST_NAME,
    RUN_STATE_COMPLETED,
    RUN_STATE_FAILED,
    RUN_STATE_RUNNING,
    RunManifest,
)
from internal.python.common.logger import LogLevel, create_logger


@pytest.mark.unit
class TestSimConfig:
    """Validation and key=value parsing of simulation configs."""

    def test_defaults(self):
        cfg = SimConfig()
        assert (cfg.d, cfg.ell, cfg.L) == (8, 1, 1)
        assert cfg.gauge_mode == GaugeMode.FULL_MODULATION
        assert cfg.to_dict()["gauge_mode"] == "full_modulation"

    @pytest.mark.parametrize("overrides", [
        {"d": 6},
        {"d": 7, "ell": 1},
        {"L": 5},
        {"ell": 2, "L": 1},
        {"M": 6000.0},
        {"eta": 1.0},
        {"n": 32},
        {"s0": -1.0},
        {"d": "seven"},
    ])
    def test_invalid_values(self, overrides):
        with pytest.raises(ParameterError):
            SimConfig.from_dict(overrides)

    def test_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# d = 8 blowup\nd = 8\n\nell=1  # stable regime\n"
                        "gauge_mode = posthoc_fit\nlambda_min = 1e-5\n")
        cfg = SimConfig.from_file(path)
        assert cfg.gauge_mode == GaugeMode.POSTHOC_FIT
        assert cfg.lambda_min == 1e-5
        assert isinstance(cfg.d, int)

    def test_unknown_key_names_the_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("d = 8\n\nlamda_min = 1e-5\n")
        with pytest.raises(ParseError) as info:
            SimConfig.from_file(path)
        assert info.value.details["line"] == 3
        assert info.value.error_type == ErrorType.PARSE

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("d 8\n")
        with pytest.raises(ParseError) as info:
            SimConfig.from_file(path)
        assert info.value.details["line"] == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileError):
            SimConfig.from_file(tmp_path / "absent.cfg")


@pytest.mark.unit
class TestSubcommandConfigs:
    """Plain dataclass configs and environment defaults."""

    def test_from_dict_coerces(self):
        assert ProfileConfig.from_dict({"d": "9", "n": "512"}) == ProfileConfig(d=9, n=512)
        assert OperatorConfig.from_dict({}).k_coercivity is None
        assert OperatorConfig.from_dict({"k_coercivity": "2"}).k_coercivity == 2
        assert QbConfig.from_dict({"b1_window": ["1e-3", "2e-3"]}).b1_window == [1e-3, 2e-3]

    def test_to_dict(self):
        assert QbConfig().to_dict()["b1_window"] == [1e-3, 2e-3, 4e-3, 1e-2]

    def test_default_threads(self, monkeypatch):
        monkeypatch.setenv("BLOWUP_LAB_THREADS", "4")
        assert default_threads() == 4
        monkeypatch.setenv("BLOWUP_LAB_THREADS", "0")
        assert default_threads() == 1
        monkeypatch.setenv("BLOWUP_LAB_THREADS", "many")
        assert default_threads() == 1

    def test_default_out_dir(self, monkeypatch):
        monkeypatch.setenv("BLOWUP_LAB_OUT", "/tmp/blowup-runs")
        assert default_out_dir() == "/tmp/blowup-runs"
        monkeypatch.delenv("BLOWUP_LAB_OUT")
        assert default_out_dir() == "runs"


@pytest.mark.unit
class TestErrorModels:
    """Serialization of errors and check results."""

    def test_error_to_dict(self):
        error = ParameterError("bad b", b=np.array([1.0, 2.0]), value=np.float64(1.5))
        assert error.to_dict() == {
            "error_type": "parameter",
            "message": "bad b",
            "details": {"b": [1.0, 2.0], "value": 1.5},
        }
        assert str(error) == "bad b"

    def test_check_result_to_dict(self):
        result = CheckResult(name="profile.q_limit[d=7]", passed=True, value=np.float64(1.5707),
                             expected=1.5708, tolerance=1e-3)
        data = result.to_dict()
        assert data["value"] == 1.5707
        assert data["passed"] is True
        json.dumps(data)


@pytest.mark.unit
class TestRunManifest:
    """Lifecycle and writing of manifest.json."""

    def make(self):
        manifest = RunManifest(subcommand="profile", config={"d": 7}, tool_version="0.3.0")
        manifest.start()
        return manifest

    def test_lifecycle(self):
        manifest = self.make()
        assert manifest.state == RUN_STATE_RUNNING
        manifest.add_check(CheckResult(name="a", passed=True))
        manifest.complete()
        assert manifest.state == RUN_STATE_COMPLETED
        assert manifest.all_passed

    def test_failed_check_fails_the_run(self):
        manifest = self.make()
        manifest.add_check(CheckResult(name="a", passed=True))
        manifest.add_check(CheckResult(name="b", passed=False))
        manifest.complete()
        assert manifest.state == RUN_STATE_FAILED
        assert manifest.failed_checks == ["b"]

    def test_fail_records_the_error(self):
        manifest = self.make()
        manifest.fail(FileError("gone", path="x").to_dict())
        assert manifest.state == RUN_STATE_FAILED
        assert manifest.error["error_type"] == "file"
        assert manifest.completed_at is not None

    def test_write(self, tmp_path):
        output = tmp_path / "profile.csv"
        output.write_text("y,Q\n")
        manifest = self.make()
        manifest.add_output(output)
        manifest.complete()
        path = manifest.write(tmp_path)
        assert path == tmp_path / MANIFEST_NAME
        data = json.loads(path.read_text())
        assert data["outputs"] == [str(output)]
        assert data["subcommand"] == "profile"
        assert data["state"] == RUN_STATE_COMPLETED

    def test_write_with_missing_output(self, tmp_path):
        manifest = self.make()
        manifest.add_output(tmp_path / "never_written.csv")
        with pytest.raises(FileError):
            manifest.write(tmp_path)
        assert not (tmp_path / MANIFEST_NAME).exists()


@pytest.mark.unit
class TestLogger:
    """Context-prefixed structured logging."""

    def test_level_names(self):
        assert LogLevel.from_name("warning") == LogLevel.WARN
        assert LogLevel.from_name("Debug") == LogLevel.DEBUG
        assert LogLevel.from_name("loud") == LogLevel.INFO
        assert LogLevel.from_name(None, LogLevel.ERROR) == LogLevel.ERROR

    def test_metadata_and_filtering(self, capsys):
        logger = create_logger("unit-logger-test", LogLevel.INFO, include_timestamp=False)
        logger.debug("hidden")
        logger.info("solved", {"d": 7})
        err = capsys.readouterr().err
        assert "hidden" not in err
        assert '[unit-logger-test] solved {"d": 7}' in err

    def test_child_context(self, capsys):
        logger = create_logger("unit-parent", LogLevel.DEBUG, include_timestamp=False)
        child = logger.child("sim")
        assert child.context == "unit-parent:sim"
        child.error("failed", ParameterError("bad", n=3))
        err = capsys.readouterr().err
        assert "[unit-parent:sim] failed" in err
        assert '"type": "ParameterError"' in err
