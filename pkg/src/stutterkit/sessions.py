"""Append-only per-patient diagnosis history (JSON lines on disk).

One object per line: {"patient_id", "ts", "prolongation", "repetition",
"report_path"}. Timestamps must strictly increase per patient. A
truncated final line (interrupted write) is skipped with a warning;
corruption anywhere else is an error.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

from .errors import IoFailure, StutterKitError


class OutOfOrderTimestamp(StutterKitError):
    """Appended session is not newer than the patient's latest one."""


class InsufficientHistory(StutterKitError):
    """Improvement needs at least two sessions for the patient."""


@dataclass(frozen=True)
class SessionRecord:
    patient_id: str
    timestamp: float  # UTC seconds
    prolongation_severity: float
    repetition_severity: float
    report_path: str | None = None

    def __post_init__(self):
        for name in ("prolongation_severity", "repetition_severity"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise ValueError(f"{name} must be in [0, 100], got {value}")

    def to_line(self) -> str:
        return json.dumps(
            {
                "patient_id": self.patient_id,
                "ts": self.timestamp,
                "prolongation": self.prolongation_severity,
                "repetition": self.repetition_severity,
                "report_path": self.report_path,
            },
            sort_keys=True,
        )

    @classmethod
    def from_line(cls, line: str) -> "SessionRecord":
        data = json.loads(line)
        return cls(
            patient_id=data["patient_id"],
            timestamp=float(data["ts"]),
            prolongation_severity=float(data["prolongation"]),
            repetition_severity=float(data["repetition"]),
            report_path=data.get("report_path"),
        )


class SessionStore:
    """Single-writer JSON-lines store; records are cached after the first load."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records = self._load()

    def _load(self) -> list[SessionRecord]:
        if not self.path.exists():
            return []
        records = []
        lines = self.path.read_text().splitlines()
        for lineno, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(SessionRecord.from_line(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if lineno == len(lines) - 1:
                    warnings.warn(f"{self.path}: ignoring truncated final line")
                else:
                    raise IoFailure(f"{self.path}:{lineno + 1}: corrupt session line: {exc}") from exc
        return records

    def append(self, record: SessionRecord) -> None:
        last = self.latest(record.patient_id)
        if last is not None and record.timestamp <= last.timestamp:
            raise OutOfOrderTimestamp(
                f"timestamp {record.timestamp} not after {last.timestamp} for {record.patient_id!r}"
            )
        try:
            with open(self.path, "a") as fh:
                fh.write(record.to_line() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise IoFailure(f"cannot append to {self.path}: {exc}") from exc
        self._records.append(record)

    def all_records(self) -> list[SessionRecord]:
        return list(self._records)

    def sessions(self, patient_id: str) -> list[SessionRecord]:
        return [r for r in self._records if r.patient_id == patient_id]

    def latest(self, patient_id: str) -> SessionRecord | None:
        found = self.sessions(patient_id)
        return found[-1] if found else None


def improvement_inputs(
    store: SessionStore, patient_id: str, window: int = 1
) -> tuple[float, float, float, float]:
    """(Ip, Cp, Ir, Cr): initial severities from the first session, current
    from the latest one (or the mean of the last `window` sessions)."""
    history = store.sessions(patient_id)
    if len(history) < 2:
        raise InsufficientHistory(f"{patient_id!r} has {len(history)} session(s), need >= 2")
    if window < 1:
        raise ValueError("window must be >= 1")
    first = history[0]
    recent = history[1:][-window:]
    cp = sum(r.prolongation_severity for r in recent) / len(recent)
    cr = sum(r.repetition_severity for r in recent) / len(recent)
    return (first.prolongation_severity, cp, first.repetition_severity, cr)
