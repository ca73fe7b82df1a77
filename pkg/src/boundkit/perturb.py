"""Deterministic generation of boundary-perturbed segments from ground truth.

Candidate start times form the arithmetic grid {start - delta_cap, ...,
start + delta_cap} with spacing ``step`` (candidate ends likewise around the
ground-truth end). Every (start, end) combination is kept when it is a valid
interval whose IoU against the ground truth clears ``min_iou``.

All grid arithmetic happens on integer milliseconds so that repeated runs
and independently written oracles agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import TimeInterval, VideoMeta

_MS = 1000


def _to_ms(t: float) -> int:
    return int(math.floor(t * _MS + 0.5)) if t >= 0 else -int(math.floor(-t * _MS + 0.5))


def _require_ms_exact(value: float, name: str) -> int:
    ms = _to_ms(value)
    if abs(value * _MS - ms) > 1e-6:
        raise ValueError(f"{name} must sit on the millisecond grid, got {value}")
    return ms


@dataclass(frozen=True)
class PerturbationConfig:
    delta_cap: float = 2.0
    step: float = 0.5
    min_iou: float = 0.5
    include_gt_pair: bool = False
    clip_to_video: bool = True

    def __post_init__(self) -> None:
        if self.delta_cap <= 0:
            raise ValueError(f"delta_cap must be positive, got {self.delta_cap}")
        if not 0 < self.step <= self.delta_cap:
            raise ValueError(f"step must satisfy 0 < step <= delta_cap, got {self.step}")
        if not 0 < self.min_iou <= 1:
            raise ValueError(f"min_iou must be in (0, 1], got {self.min_iou}")
        delta_ms = _require_ms_exact(self.delta_cap, "delta_cap")
        step_ms = _require_ms_exact(self.step, "step")
        if delta_ms % step_ms != 0:
            raise ValueError(
                f"delta_cap/step must be an integer so the grid closes at +/-delta_cap, "
                f"got {self.delta_cap}/{self.step}"
            )

    @property
    def half_points(self) -> int:
        """Grid points on one side of the anchor; the grid has 2*half_points + 1."""
        return _require_ms_exact(self.delta_cap, "delta_cap") // _require_ms_exact(self.step, "step")


@dataclass(frozen=True)
class GeneratedSegment:
    """A perturbed interval plus its descriptors relative to its ground truth."""

    segment_id: str
    source_annotation_id: str
    interval: TimeInterval
    iou_vs_gt: float
    start_shift: float
    end_shift: float
    length_diff: float


def _grid_ms(anchor_ms: int, cfg: PerturbationConfig) -> list[int]:
    step_ms = _to_ms(cfg.step)
    n = cfg.half_points
    return [anchor_ms + (i - n) * step_ms for i in range(2 * n + 1)]


def candidate_starts(gt: TimeInterval, cfg: PerturbationConfig) -> list[float]:
    return [ms / _MS for ms in _grid_ms(_to_ms(gt.start), cfg)]


def candidate_ends(gt: TimeInterval, cfg: PerturbationConfig) -> list[float]:
    return [ms / _MS for ms in _grid_ms(_to_ms(gt.end), cfg)]


def generate(
    gt: TimeInterval,
    cfg: PerturbationConfig,
    video: VideoMeta | None = None,
    source_id: str = "gt",
) -> list[GeneratedSegment]:
    """All grid combinations that form valid intervals with IoU >= min_iou.

    The ground truth is snapped to the millisecond grid first; descriptors are
    computed against the snapped interval. Candidates starting before time 0
    are always dropped (intervals cannot begin before the video); candidates
    ending past the video duration are dropped when clip_to_video is set and
    the video metadata is known. The exact ground-truth pair is excluded
    unless include_gt_pair. Output is sorted by (start, end); segment ids are
    the source id plus grid indices, so two runs produce identical output.
    """
    gt_start_ms = _to_ms(gt.start)
    gt_end_ms = _to_ms(gt.end)
    gt_len_ms = gt_end_ms - gt_start_ms
    duration_ms = _to_ms(video.duration) if (video is not None and cfg.clip_to_video) else None

    starts_ms = _grid_ms(gt_start_ms, cfg)
    ends_ms = _grid_ms(gt_end_ms, cfg)

    segments: list[GeneratedSegment] = []
    for si, s_ms in enumerate(starts_ms):
        if s_ms < 0:
            continue
        for ei, e_ms in enumerate(ends_ms):
            if e_ms <= s_ms:
                continue
            if duration_ms is not None and e_ms > duration_ms:
                continue
            if not cfg.include_gt_pair and s_ms == gt_start_ms and e_ms == gt_end_ms:
                continue
            overlap_ms = min(e_ms, gt_end_ms) - max(s_ms, gt_start_ms)
            if overlap_ms <= 0:
                continue
            union_ms = gt_len_ms + (e_ms - s_ms) - overlap_ms
            iou_value = overlap_ms / union_ms
            if iou_value < cfg.min_iou:
                continue
            segments.append(
                GeneratedSegment(
                    segment_id=f"{source_id}_s{si}_e{ei}",
                    source_annotation_id=source_id,
                    interval=TimeInterval(s_ms / _MS, e_ms / _MS),
                    iou_vs_gt=iou_value,
                    start_shift=(s_ms - gt_start_ms) / _MS,
                    end_shift=(e_ms - gt_end_ms) / _MS,
                    length_diff=((e_ms - s_ms) - gt_len_ms) / _MS,
                )
            )
    return segments


@dataclass(frozen=True)
class DescriptorBins:
    """Bin edges for the four accuracy breakdowns of an evaluation report.

    Shift bins are the candidate grid offsets themselves; length-diff bins
    span twice that range (a start and an end shift can add up). IoU uses the
    fixed cumulative thresholds (accuracy over IoU > t) and the matching
    disjoint buckets (lo, hi].
    """

    shift_bins: tuple[float, ...]
    length_diff_bins: tuple[float, ...]
    iou_thresholds: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)
    iou_buckets: tuple[tuple[float, float], ...] = (
        (0.5, 0.6),
        (0.6, 0.7),
        (0.7, 0.8),
        (0.8, 0.9),
        (0.9, 1.0),
    )


def descriptor_bins(cfg: PerturbationConfig) -> DescriptorBins:
    step_ms = _to_ms(cfg.step)
    n = cfg.half_points
    shift = tuple((i - n) * step_ms / _MS for i in range(2 * n + 1))
    length = tuple((i - 2 * n) * step_ms / _MS for i in range(4 * n + 1))
    return DescriptorBins(shift_bins=shift, length_diff_bins=length)
