"""Severity indices, quartile buckets, and the longitudinal improvement index.

Severity is the percentage of 1-second segments called positive.
Quartile bucket k covers ((k-1)*25, k*25] percent, with 0 mapped to 1,
so the mapping is total on [0, 100]. The improvement bucket is
ceil(mean of the two per-type severity drops / 25), clamped to [1, 4].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import StutterKitError


class NoSegments(StutterKitError):
    """Severity is undefined for an empty segment list."""


class OutOfRange(StutterKitError):
    """A percentage argument fell outside [0, 100]."""


@dataclass(frozen=True)
class SeverityIndex:
    value: float  # percent in [0, 100]
    kind: object | None
    n_segments: int


@dataclass(frozen=True)
class QuartileBucket:
    level: int

    def __post_init__(self):
        if self.level not in (1, 2, 3, 4):
            raise ValueError(f"bucket level must be 1..4, got {self.level}")


@dataclass(frozen=True)
class StutterProfile:
    prolongation: QuartileBucket
    repetition: QuartileBucket
    improvement: QuartileBucket

    def as_vector(self) -> tuple[int, int, int]:
        return (self.prolongation.level, self.repetition.level, self.improvement.level)

    def to_json(self) -> str:
        p, r, i = self.as_vector()
        return json.dumps({"prolongation": p, "repetition": r, "improvement": i}, sort_keys=True)

    @classmethod
    def from_levels(cls, prolongation: int, repetition: int, improvement: int) -> "StutterProfile":
        return cls(QuartileBucket(prolongation), QuartileBucket(repetition), QuartileBucket(improvement))


def severity_index(calls, kind=None) -> SeverityIndex:
    """100 * positives / total over binary per-segment calls."""
    calls = list(calls)
    if not calls:
        raise NoSegments("severity is undefined with zero segments")
    positives = sum(1 for c in calls if c)
    return SeverityIndex(100.0 * positives / len(calls), kind, len(calls))


def bucketize(percent: float) -> QuartileBucket:
    """Quartile level of a percentage: (0,25]->1, (25,50]->2, (50,75]->3, (75,100]->4, 0->1."""
    if not 0.0 <= percent <= 100.0:
        raise OutOfRange(f"percent must be in [0, 100], got {percent}")
    return QuartileBucket(min(4, max(1, math.ceil(percent / 25.0))))


def improvement_bucket(ip: float, cp: float, ir: float, cr: float) -> QuartileBucket:
    """Bucketed improvement from initial (ip, ir) to current (cp, cr) severities.

    raw = mean of the prolongation and repetition severity drops;
    level = ceil(raw / 25) clamped to [1, 4], so no change or regression
    lands in bucket 1 (under 25% improvement).
    """
    for name, value in (("ip", ip), ("cp", cp), ("ir", ir), ("cr", cr)):
        if not 0.0 <= value <= 100.0:
            raise OutOfRange(f"{name} must be in [0, 100], got {value}")
    raw = ((ip - cp) + (ir - cr)) / 2.0
    return QuartileBucket(min(4, max(1, math.ceil(raw / 25.0))))
