"""
Run manifest: the record written next to every set of outputs.

Tracks the subcommand, the echoed config, timestamps, the output files and
the per-check verdicts, using the same created/running/completed/failed
lifecycle the check runner walks through.
"""

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from internal.python.blowup_lab.models.errors import CheckResult, FileError

RUN_STATE_CREATED = 'CREATED'
RUN_STATE_RUNNING = 'RUNNING'
RUN_STATE_COMPLETED = 'COMPLETED'
RUN_STATE_FAILED = 'FAILED'

MANIFEST_NAME = "manifest.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Serializable description of one CLI run."""
    subcommand: str
    config: Dict[str, Any]
    tool_version: str
    state: str = RUN_STATE_CREATED
    started_at: Optional[str] = None
    completed_at: Optional[str] = None
    outputs: List[str] = field(default_factory=list)
    checks: List[CheckResult] = field(default_factory=list)
    error: Optional[Dict[str, Any]] = None

    def start(self) -> None:
        self.state = RUN_STATE_RUNNING
        self.started_at = _now()

    def add_output(self, path: Path) -> None:
        self.outputs.append(str(path))

    def add_check(self, result: CheckResult) -> None:
        self.checks.append(result)

    def complete(self) -> None:
        self.state = RUN_STATE_COMPLETED if self.all_passed else RUN_STATE_FAILED
        self.completed_at = _now()

    def fail(self, error: Dict[str, Any]) -> None:
        self.state = RUN_STATE_FAILED
        self.error = error
        self.completed_at = _now()

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed_checks(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "config": self.config,
            "tool_version": self.tool_version,
            "state": self.state,
            "started_at": self.started_at,
            "completed_at": self.completed_at,
            "outputs": list(self.outputs),
            "checks": [check.to_dict() for check in self.checks],
            "error": self.error,
        }

    def write(self, out_dir: Path) -> Path:
        """Write manifest.json; every listed output must exist."""
        missing = [p for p in self.outputs if not Path(p).exists()]
        if missing:
            raise FileError("manifest lists missing outputs", missing=missing)
        path = Path(out_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str))
        return path
