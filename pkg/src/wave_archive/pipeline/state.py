"""Per-day phase checkpoints."""

from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..utils.utils import read_json, write_json

STATE_FILE = "state.json"
FAILURE_FILE = "failure.json"


class Phase(str, Enum):
    VERIFIED = "verified"
    PARSED = "parsed"
    LINKED = "linked"
    SEGMENTED = "segmented"
    WRITTEN = "written"
    DEIDENTIFIED = "deidentified"
    PUBLISHED = "published"

    @property
    def rank(self) -> int:
        return PHASES.index(self)


PHASES: List[Phase] = list(Phase)


def state_dir(identified_root: Path, day: date) -> Path:
    return identified_root / "state" / f"day={day.isoformat()}"


@dataclass
class DayRunState:
    """
    The last phase a day completed, with the content digest of each
    completed phase's output.
    """
    day: date
    phase: Optional[Phase] = None
    digests: Dict[str, str] = field(default_factory=dict)

    def done(self, phase: Phase) -> bool:
        return self.phase is not None and self.phase.rank >= phase.rank

    def advance(self, phase: Phase, digest: str) -> None:
        expected = 0 if self.phase is None else self.phase.rank + 1
        if phase.rank != expected:
            raise ValueError(f"cannot move from {self.phase} to {phase.value}")
        self.phase = phase
        self.digests[phase.value] = digest

    @property
    def published(self) -> bool:
        return self.phase is Phase.PUBLISHED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "day": self.day.isoformat(),
            "phase": self.phase.value if self.phase is not None else None,
            "digests": {p.value: self.digests[p.value] for p in PHASES if p.value in self.digests},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DayRunState':
        phase = data.get("phase")
        state = cls(day=date.fromisoformat(data["day"]), phase=Phase(phase) if phase else None,
                    digests=dict(data.get("digests", {})))
        if state.phase is not None:
            missing = [p.value for p in PHASES[:state.phase.rank + 1] if p.value not in state.digests]
            if missing:
                raise ValueError(f"state for {data['day']} lacks digests for {missing}")
        return state

    @classmethod
    def load(cls, identified_root: Path, day: date) -> 'DayRunState':
        path = state_dir(identified_root, day) / STATE_FILE
        if not path.is_file():
            return cls(day=day)
        return cls.from_dict(read_json(path))

    def save(self, identified_root: Path) -> None:
        write_json(state_dir(identified_root, self.day) / STATE_FILE, self.to_dict())


def write_failure(identified_root: Path, day: date, phase: Phase, error: BaseException) -> Path:
    path = state_dir(identified_root, day) / FAILURE_FILE
    write_json(path, {
        "day": day.isoformat(),
        "phase": phase.value,
        "error_type": type(error).__name__,
        "message": str(error),
    })
    return path


def read_failure(identified_root: Path, day: date) -> Optional[Dict[str, Any]]:
    path = state_dir(identified_root, day) / FAILURE_FILE
    return read_json(path) if path.is_file() else None


def clear_failure(identified_root: Path, day: date) -> None:
    (state_dir(identified_root, day) / FAILURE_FILE).unlink(missing_ok=True)
