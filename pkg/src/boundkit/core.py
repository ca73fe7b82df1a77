"""Domain types and pure interval arithmetic shared by every other module."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

# Absolute tolerance for comparing times that round-trip through decimal text.
SECONDS_TOL = 1e-6


@dataclass(frozen=True)
class TimeInterval:
    """A [start, end) span in seconds. Zero-duration intervals are invalid."""

    start: float
    end: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValueError(f"non-finite interval bounds: [{self.start}, {self.end})")
        if self.start < 0:
            raise ValueError(f"interval start must be non-negative, got {self.start}")
        if not self.start < self.end:
            raise ValueError(f"interval must have positive duration: [{self.start}, {self.end})")

    def duration(self) -> float:
        return self.end - self.start


def iou(a: TimeInterval, b: TimeInterval) -> float:
    """Intersection-over-union of two intervals; 0.0 when disjoint."""
    overlap = min(a.end, b.end) - max(a.start, b.start)
    if overlap <= 0:
        return 0.0
    union = a.duration() + b.duration() - overlap
    return overlap / union


def shifts(gt: TimeInterval, gen: TimeInterval) -> tuple[float, float, float]:
    """(start_shift, end_shift, length_diff) of ``gen`` relative to ``gt``.

    Negative start shift means the generated interval begins before the
    ground truth one; length_diff = end_shift - start_shift.
    """
    start_shift = gen.start - gt.start
    end_shift = gen.end - gt.end
    return start_shift, end_shift, gen.duration() - gt.duration()


class Schema(enum.Enum):
    CONVENTIONAL = "conventional"
    RUBICON = "rubicon"


@dataclass(frozen=True)
class ActionClass:
    """A verb-noun label such as "pour oil". Tokens are lowercase, no whitespace."""

    verb: str
    noun: str

    def __post_init__(self) -> None:
        for name, token in (("verb", self.verb), ("noun", self.noun)):
            if not token:
                raise ValueError(f"{name} must be non-empty")
            if token != token.lower() or any(c.isspace() for c in token):
                raise ValueError(f"{name} must be a lowercase token, got {token!r}")

    def __str__(self) -> str:
        return f"{self.verb} {self.noun}"

    @classmethod
    def parse(cls, text: str) -> "ActionClass":
        parts = text.split(" ")
        if len(parts) != 2:
            raise ValueError(f"expected 'verb noun', got {text!r}")
        return cls(verb=parts[0], noun=parts[1])


@dataclass(frozen=True)
class RBAnnotation:
    """Pre-actional + actional phase pair; the actional phase starts exactly
    where the pre-actional one ends (within SECONDS_TOL)."""

    pre_actional: TimeInterval
    actional: TimeInterval

    def __post_init__(self) -> None:
        gap = self.actional.start - self.pre_actional.end
        if abs(gap) > SECONDS_TOL:
            raise ValueError(f"RB adjacency violated (gap {gap:+.6f} s)")

    def full(self) -> TimeInterval:
        return TimeInterval(self.pre_actional.start, self.actional.end)


@dataclass(frozen=True)
class AnnotationRecord:
    """One labeled instance: exactly one of ``interval``/``rb`` is populated,
    matching ``schema``."""

    annotation_id: str
    video_id: str
    action: ActionClass
    annotator_id: str
    schema: Schema
    instance_key: str
    interval: TimeInterval | None = None
    rb: RBAnnotation | None = None

    def __post_init__(self) -> None:
        for name, value in (
            ("annotation_id", self.annotation_id),
            ("video_id", self.video_id),
            ("annotator_id", self.annotator_id),
            ("instance_key", self.instance_key),
        ):
            if not value:
                raise ValueError(f"{name} must be non-empty")
        if self.schema is Schema.CONVENTIONAL:
            if self.interval is None or self.rb is not None:
                raise ValueError("conventional record must populate interval only")
        else:
            if self.rb is None or self.interval is not None:
                raise ValueError("rubicon record must populate rb only")

    def span(self) -> TimeInterval:
        """The record's full temporal extent regardless of schema."""
        if self.interval is not None:
            return self.interval
        assert self.rb is not None
        return self.rb.full()


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    duration: float
    frame_rate: float

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.frame_rate <= 0:
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate}")


def frame_to_time(frame: int, meta: VideoMeta) -> float:
    if frame < 0:
        raise ValueError(f"frame index must be non-negative, got {frame}")
    return frame / meta.frame_rate


def time_to_frame(t: float, meta: VideoMeta) -> int:
    """Nearest-frame rounding; round-trips frame_to_time exactly."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return int(math.floor(t * meta.frame_rate + 0.5))
