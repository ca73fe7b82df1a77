"""Self-contained stand-in for a video action classifier: seeded synthetic
feature streams plus a nearest-centroid classifier over mean-pooled frames.

Each synthetic instance is a noisy feature stream carrying one action whose
actional-phase frames contain the class prototype at full strength and whose
pre-actional frames carry it at half strength. Expanding a query interval
dilutes the pooled evidence with background frames; that dilution is what
makes classification accuracy sensitive to boundary perturbations, which is
the phenomenon this module exists to demonstrate and regression-test.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ActionClass, AnnotationRecord, RBAnnotation, Schema, TimeInterval, VideoMeta
from .diagnostics import Diagnostic
from .harness import EvaluationReport, build_registry, make_folds, score
from .io import Prediction
from .perturb import GeneratedSegment, PerturbationConfig, descriptor_bins, generate

# Keeps room on both sides of a placed action for perturbation grids,
# when the stream is long enough to afford it.
PLACEMENT_MARGIN_S = 2.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Defaults are the published sensitivity-benchmark configuration.

    The low frame rate is deliberate: with few frames per query, pooled noise
    scales with query length, so both expanding a segment (dilution) and
    trimming it (fewer frames) cost accuracy, as boundary perturbation does
    for real recognition pipelines.
    """

    n_classes: int = 10
    feature_dim: int = 16
    instances_per_class: int = 60
    stream_length: float = 20.0
    frame_rate: float = 2.0
    action_duration_range: tuple[float, float] = (4.5, 7.5)
    background_noise_sigma: float = 0.75
    signal_strength: float = 1.0
    pre_actional_fraction: float = 0.3
    seed: int = 42

    def __post_init__(self) -> None:
        if self.n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.n_classes}")
        if self.feature_dim < self.n_classes:
            raise ValueError(
                f"feature_dim {self.feature_dim} < n_classes {self.n_classes}: orthogonal prototypes impossible"
            )
        if self.instances_per_class < 1:
            raise ValueError("instances_per_class must be positive")
        if self.stream_length <= 0 or self.frame_rate <= 0 or self.signal_strength <= 0:
            raise ValueError("stream_length, frame_rate and signal_strength must be positive")
        if self.background_noise_sigma < 0:
            raise ValueError("background_noise_sigma must be non-negative")
        lo, hi = self.action_duration_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad action_duration_range {self.action_duration_range}")
        if hi > self.stream_length:
            raise ValueError("actions must fit inside the stream")
        if not 0 < self.pre_actional_fraction < 1:
            raise ValueError(f"pre_actional_fraction must be in (0, 1), got {self.pre_actional_fraction}")
        if round(lo * self.frame_rate) < 2:
            raise ValueError("shortest action must span at least 2 frames to hold both phases")


@dataclass(frozen=True)
class SyntheticInstance:
    stream: np.ndarray  # (n_frames, feature_dim)
    gt: AnnotationRecord
    action: ActionClass
    meta: VideoMeta


def class_prototypes(spec: SyntheticSpec) -> np.ndarray:
    """Orthogonal unit vectors (standard basis rows) scaled by signal_strength."""
    protos = np.zeros((spec.n_classes, spec.feature_dim))
    for i in range(spec.n_classes):
        protos[i, i] = spec.signal_strength
    return protos


def class_label(index: int) -> ActionClass:
    return ActionClass(verb=f"verb{index:02d}", noun=f"noun{index:02d}")


def frames_in_interval(interval: TimeInterval, frame_rate: float, n_frames: int) -> tuple[int, int]:
    """Half-open frame range [first, last) covered by the interval, clipped to
    the stream. Raises when the interval misses the stream entirely."""
    first = int(np.floor(interval.start * frame_rate + 0.5))
    last = int(np.floor(interval.end * frame_rate + 0.5))
    first_clipped = max(first, 0)
    last_clipped = min(last, n_frames)
    if first_clipped >= last_clipped:
        raise ValueError(f"query [{interval.start}, {interval.end}) lies outside the stream")
    return first_clipped, last_clipped


def generate_dataset(spec: SyntheticSpec) -> list[SyntheticInstance]:
    """Balanced, seeded dataset; instance i belongs to class i mod n_classes.

    Per-instance RNG streams derive from (seed, instance index), so any
    parallel generation schedule would see the same data.
    """
    protos = class_prototypes(spec)
    n_frames = int(round(spec.stream_length * spec.frame_rate))
    total = spec.n_classes * spec.instances_per_class
    lo, hi = spec.action_duration_range
    lo_frames = int(round(lo * spec.frame_rate))
    hi_frames = int(round(hi * spec.frame_rate))

    instances: list[SyntheticInstance] = []
    for idx in range(total):
        class_idx = idx % spec.n_classes
        rng = np.random.default_rng([spec.seed, idx])
        dur_frames = int(rng.integers(lo_frames, hi_frames + 1))
        margin_frames = int(round(min(PLACEMENT_MARGIN_S, max(0.0, (n_frames - dur_frames) / spec.frame_rate / 2)) * spec.frame_rate))
        first_valid = margin_frames
        last_valid = n_frames - dur_frames - margin_frames
        start_frame = int(rng.integers(first_valid, last_valid + 1)) if last_valid > first_valid else first_valid
        pre_frames = int(np.clip(round(dur_frames * spec.pre_actional_fraction), 1, dur_frames - 1))

        stream = (
            rng.standard_normal((n_frames, spec.feature_dim)) * spec.background_noise_sigma
            if spec.background_noise_sigma > 0
            else np.zeros((n_frames, spec.feature_dim))
        )
        boundary_frame = start_frame + pre_frames
        end_frame = start_frame + dur_frames
        stream[start_frame:boundary_frame] += 0.5 * protos[class_idx]
        stream[boundary_frame:end_frame] += protos[class_idx]

        rate = spec.frame_rate
        rb = RBAnnotation(
            pre_actional=TimeInterval(start_frame / rate, boundary_frame / rate),
            actional=TimeInterval(boundary_frame / rate, end_frame / rate),
        )
        video_id = f"vid{idx:04d}"
        gt = AnnotationRecord(
            annotation_id=f"syn{idx:04d}",
            video_id=video_id,
            action=class_label(class_idx),
            annotator_id="synth",
            schema=Schema.RUBICON,
            instance_key=f"inst{idx:04d}",
            rb=rb,
        )
        meta = VideoMeta(video_id=video_id, duration=spec.stream_length, frame_rate=rate)
        instances.append(SyntheticInstance(stream=stream, gt=gt, action=gt.action, meta=meta))
    return instances


# ---------------------------------------------------------------------------
# Interval selectors


def select_full(instance: SyntheticInstance) -> TimeInterval:
    assert instance.gt.rb is not None
    return instance.gt.rb.full()


def select_actional(instance: SyntheticInstance) -> TimeInterval:
    assert instance.gt.rb is not None
    return instance.gt.rb.actional


def select_pre_actional(instance: SyntheticInstance) -> TimeInterval:
    assert instance.gt.rb is not None
    return instance.gt.rb.pre_actional


# ---------------------------------------------------------------------------
# Classifier


@dataclass(frozen=True)
class Centroids:
    actions: tuple[ActionClass, ...]
    vectors: np.ndarray  # (n_classes, feature_dim)


def fit_centroids(
    instances: Sequence[SyntheticInstance],
    interval_selector: Callable[[SyntheticInstance], TimeInterval] = select_full,
    expected_classes: Sequence[ActionClass] | None = None,
) -> Centroids:
    """Per-class mean of mean-pooled features over each instance's selected
    interval. With expected_classes given, a class lacking training instances
    is an error rather than a silently smaller centroid set."""
    pooled: dict[str, list[np.ndarray]] = {}
    actions: dict[str, ActionClass] = {}
    for inst in instances:
        interval = interval_selector(inst)
        first, last = frames_in_interval(interval, inst.meta.frame_rate, inst.stream.shape[0])
        pooled.setdefault(str(inst.action), []).append(inst.stream[first:last].mean(axis=0))
        actions.setdefault(str(inst.action), inst.action)
    if not pooled:
        raise ValueError("no training instances")
    if expected_classes is not None:
        missing = sorted({str(a) for a in expected_classes} - set(pooled))
        if missing:
            raise ValueError(f"no training instances for class(es): {missing}")
    names = sorted(pooled)
    vectors = np.stack([np.mean(pooled[name], axis=0) for name in names])
    return Centroids(actions=tuple(actions[name] for name in names), vectors=vectors)


@dataclass(frozen=True)
class AllFrames:
    pass


@dataclass(frozen=True)
class RandomK:
    k: int
    seed: int = 0


def classify(
    stream: np.ndarray,
    query: TimeInterval,
    centroids: Centroids,
    frame_rate: float,
    sampling: AllFrames | RandomK = AllFrames(),
) -> ActionClass:
    """Mean-pool (sampled) frames inside the query; return the nearest centroid.

    RandomK mirrors classifiers that average predictions over min(k, |v|)
    randomly drawn frames; it is seeded, so identical calls agree.
    """
    first, last = frames_in_interval(query, frame_rate, stream.shape[0])
    frames = stream[first:last]
    if isinstance(sampling, RandomK):
        if sampling.k < 1:
            raise ValueError(f"sample size must be positive, got {sampling.k}")
        n = frames.shape[0]
        take = min(sampling.k, n)
        rng = np.random.default_rng([sampling.seed, first, last])
        frames = frames[np.sort(rng.choice(n, size=take, replace=False))]
    pooled = frames.mean(axis=0)
    distances = np.linalg.norm(centroids.vectors - pooled, axis=1)
    return centroids.actions[int(np.argmin(distances))]


# ---------------------------------------------------------------------------
# End-to-end benchmark


@dataclass(frozen=True)
class BenchmarkResult:
    report: EvaluationReport
    records: list[AnnotationRecord]
    segments: list[GeneratedSegment]
    predictions: list[Prediction]
    diagnostics: list[Diagnostic]


def query_seed(base_seed: int, segment_id: str) -> int:
    return zlib.crc32(segment_id.encode("utf-8")) ^ (base_seed & 0xFFFFFFFF)


def run_benchmark(
    spec: SyntheticSpec,
    perturbation: PerturbationConfig = PerturbationConfig(),
    k_folds: int = 5,
    fold_seed: int | None = None,
    sample_k: int = 20,
) -> BenchmarkResult:
    """Folds + perturbation + classification + scoring in one pass.

    Centroids are trained per fold on ground-truth full intervals only; the
    fold's test instances are then classified on their ground-truth interval
    and on every generated perturbation of it.
    """
    instances = generate_dataset(spec)
    by_annotation = {inst.gt.annotation_id: inst for inst in instances}
    records = [inst.gt for inst in instances]
    folds = make_folds(records, k=k_folds, seed=spec.seed if fold_seed is None else fold_seed, stratified=True)

    roster = [class_label(i) for i in range(spec.n_classes)]
    segments = []
    predictions: list[Prediction] = []
    for fold_index in range(folds.k):
        train = [by_annotation[a] for a in sorted(folds.train_ids(fold_index))]
        centroids = fit_centroids(train, select_full, expected_classes=roster)
        for ann_id in sorted(folds.test_ids(fold_index)):
            inst = by_annotation[ann_id]
            gt_interval = select_full(inst)
            sampling = RandomK(k=sample_k, seed=query_seed(spec.seed, ann_id))
            predictions.append(
                Prediction(ann_id, classify(inst.stream, gt_interval, centroids, inst.meta.frame_rate, sampling))
            )
            for seg in generate(gt_interval, perturbation, video=inst.meta, source_id=ann_id):
                segments.append(seg)
                sampling = RandomK(k=sample_k, seed=query_seed(spec.seed, seg.segment_id))
                predictions.append(
                    Prediction(
                        seg.segment_id,
                        classify(inst.stream, seg.interval, centroids, inst.meta.frame_rate, sampling),
                    )
                )

    registry, registry_diagnostics = build_registry(records, segments)
    report, score_diagnostics = score(predictions, registry, descriptor_bins(perturbation))
    return BenchmarkResult(
        report=report,
        records=records,
        segments=segments,
        predictions=predictions,
        diagnostics=registry_diagnostics + score_diagnostics,
    )
