"""Cross-validation folds, training-set augmentation and the accuracy
breakdowns of an evaluation run: overall ground-truth vs generated accuracy,
accuracy binned by IoU / start shift / end shift / length difference, and
per-class deltas.
"""

from __future__ import annotations

import csv
import io as _stdio
import json
import math
import random
from dataclasses import dataclass, field

from .core import ActionClass, AnnotationRecord
from .diagnostics import Diagnostic
from .perturb import DescriptorBins, GeneratedSegment

# ---------------------------------------------------------------------------
# Folds


@dataclass(frozen=True)
class FoldSplit:
    k: int
    assignments: dict[str, int]

    def test_ids(self, fold: int) -> set[str]:
        return {ann_id for ann_id, f in self.assignments.items() if f == fold}

    def train_ids(self, fold: int) -> set[str]:
        return {ann_id for ann_id, f in self.assignments.items() if f != fold}


def make_folds(records: list[AnnotationRecord], k: int, seed: int, stratified: bool = True) -> FoldSplit:
    """Deterministic k-fold assignment of ground-truth annotations.

    Stratified mode shuffles within each class and deals instances round-robin
    across folds (continuing the fold counter from class to class), so fold
    sizes differ by at most one within every class and classes with fewer than
    k instances land on distinct folds.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    ids = [rec.annotation_id for rec in records]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate annotation_id in fold input")
    rng = random.Random(seed)
    assignments: dict[str, int] = {}
    if stratified:
        by_class: dict[str, list[str]] = {}
        for rec in records:
            by_class.setdefault(str(rec.action), []).append(rec.annotation_id)
        next_fold = 0
        for name in sorted(by_class):
            members = by_class[name]
            rng.shuffle(members)
            for ann_id in members:
                assignments[ann_id] = next_fold
                next_fold = (next_fold + 1) % k
    else:
        shuffled = list(ids)
        rng.shuffle(shuffled)
        for i, ann_id in enumerate(shuffled):
            assignments[ann_id] = i % k
    return FoldSplit(k=k, assignments=assignments)


# ---------------------------------------------------------------------------
# Augmentation


@dataclass(frozen=True)
class AugmentedSet:
    gt_ids: tuple[str, ...]
    generated_ids: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.gt_ids) + len(self.generated_ids)


def augment(
    train_ids: list[str], generated_pool: list[GeneratedSegment], factor: float, seed: int
) -> AugmentedSet:
    """Training set plus a uniform sample without replacement from the pool.

    The sample has size round((factor - 1) * |train|). Every pool segment must
    stem from a training annotation; a pool reaching into the test fold is a
    leakage bug and raises.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    train = set(train_ids)
    leaked = sorted({seg.source_annotation_id for seg in generated_pool} - train)
    if leaked:
        raise ValueError(f"augmentation pool leaks segments from outside the training set: {leaked[:5]}")
    need = int(round((factor - 1) * len(train)))
    if need > len(generated_pool):
        raise ValueError(
            f"augmentation pool too small: need {need} segments, have {len(generated_pool)} "
            f"(short by {need - len(generated_pool)})"
        )
    pool_ids = sorted(seg.segment_id for seg in generated_pool)
    rng = random.Random(seed)
    sampled = sorted(rng.sample(pool_ids, need))
    return AugmentedSet(gt_ids=tuple(sorted(train)), generated_ids=tuple(sampled))


# ---------------------------------------------------------------------------
# Segment registry


@dataclass(frozen=True)
class SegmentInfo:
    segment_id: str
    action: ActionClass
    is_generated: bool
    source_annotation_id: str
    segment: GeneratedSegment | None = None


def build_registry(
    records: list[AnnotationRecord], segments: list[GeneratedSegment]
) -> tuple[dict[str, SegmentInfo], list[Diagnostic]]:
    """Resolve every scoreable segment id to its true class and descriptors.

    Ground-truth segments are keyed by annotation_id; generated segments
    inherit their class from the source annotation.
    """
    diagnostics: list[Diagnostic] = []
    registry: dict[str, SegmentInfo] = {}
    by_annotation: dict[str, AnnotationRecord] = {}
    for rec in records:
        if rec.annotation_id in registry:
            diagnostics.append(Diagnostic("duplicate_annotation_id", f"{rec.annotation_id!r} seen twice; keeping first"))
            continue
        by_annotation[rec.annotation_id] = rec
        registry[rec.annotation_id] = SegmentInfo(
            segment_id=rec.annotation_id,
            action=rec.action,
            is_generated=False,
            source_annotation_id=rec.annotation_id,
        )
    for seg in segments:
        source = by_annotation.get(seg.source_annotation_id)
        if source is None:
            diagnostics.append(
                Diagnostic("unknown_source", f"segment {seg.segment_id!r} references unknown annotation {seg.source_annotation_id!r}")
            )
            continue
        if seg.segment_id in registry:
            diagnostics.append(Diagnostic("duplicate_segment_id", f"{seg.segment_id!r} seen twice; keeping first"))
            continue
        registry[seg.segment_id] = SegmentInfo(
            segment_id=seg.segment_id,
            action=source.action,
            is_generated=True,
            source_annotation_id=seg.source_annotation_id,
            segment=seg,
        )
    return registry, diagnostics


# ---------------------------------------------------------------------------
# Scoring


def _iou_bucket_key(lo: float, hi: float) -> str:
    return f"({lo:.1f},{hi:.1f}]"


def _shift_key(value: float) -> str:
    return f"{value:.3f}"


@dataclass
class _BinCounter:
    correct: dict[str, int] = field(default_factory=dict)
    total: dict[str, int] = field(default_factory=dict)

    def add(self, key: str, is_correct: bool) -> None:
        self.total[key] = self.total.get(key, 0) + 1
        if is_correct:
            self.correct[key] = self.correct.get(key, 0) + 1

    def accuracy(self, key: str) -> float | None:
        total = self.total.get(key, 0)
        if total == 0:
            return None
        return self.correct.get(key, 0) / total


@dataclass
class EvaluationReport:
    overall_gt_accuracy: float | None
    overall_gen_accuracy: float | None
    n_gt_predictions: int
    n_gen_predictions: int
    accuracy_by_iou_cumulative: dict[str, float | None]
    accuracy_by_iou_bucket: dict[str, float | None]
    accuracy_by_start_shift: dict[str, float | None]
    accuracy_by_end_shift: dict[str, float | None]
    accuracy_by_length_diff: dict[str, float | None]
    per_class_gt_accuracy: dict[str, float]
    per_class_gen_accuracy: dict[str, float]
    per_class_delta: dict[str, float]
    class_changes: dict[str, list[str]]
    fraction_classes_dropped: float
    bin_counts: dict[str, dict[str, tuple[int, int]]]


def score(
    predictions: list,
    registry: dict[str, SegmentInfo],
    bins: DescriptorBins,
    fold: tuple[FoldSplit, int] | None = None,
) -> tuple[EvaluationReport, list[Diagnostic]]:
    """Accuracy report over one prediction set.

    Predictions on ground-truth segments and on generated segments accumulate
    separately; binned accuracies cover generated segments only. With ``fold``
    given, only segments whose (source) annotation sits in that test fold are
    scored. Unresolvable segment ids become diagnostics and are excluded.
    """
    diagnostics: list[Diagnostic] = []
    gt_counts = _BinCounter()
    gen_counts = _BinCounter()
    by_iou_cum = _BinCounter()
    by_iou_bucket = _BinCounter()
    by_start = _BinCounter()
    by_end = _BinCounter()
    by_length = _BinCounter()
    gt_class = _BinCounter()
    gen_class = _BinCounter()

    shift_keys = {_shift_key(b) for b in bins.shift_bins}
    length_keys = {_shift_key(b) for b in bins.length_diff_bins}

    for pred in predictions:
        info = registry.get(pred.segment_id)
        if info is None:
            diagnostics.append(Diagnostic("unknown_segment", f"prediction for unknown segment {pred.segment_id!r}"))
            continue
        if fold is not None:
            split, index = fold
            if split.assignments.get(info.source_annotation_id) != index:
                continue
        is_correct = pred.action == info.action
        class_key = str(info.action)
        if not info.is_generated:
            gt_counts.add("all", is_correct)
            gt_class.add(class_key, is_correct)
            continue
        gen_counts.add("all", is_correct)
        gen_class.add(class_key, is_correct)
        seg = info.segment
        assert seg is not None
        # 6-decimal rounding keeps bin membership stable across CSV round-trips.
        iou_r = round(seg.iou_vs_gt, 6)
        for t in bins.iou_thresholds:
            if iou_r > round(t, 6):
                by_iou_cum.add(f"{t:.1f}", is_correct)
        for lo, hi in bins.iou_buckets:
            if round(lo, 6) < iou_r <= round(hi, 6):
                by_iou_bucket.add(_iou_bucket_key(lo, hi), is_correct)
                break
        start_key = _shift_key(seg.start_shift)
        if start_key in shift_keys:
            by_start.add(start_key, is_correct)
        end_key = _shift_key(seg.end_shift)
        if end_key in shift_keys:
            by_end.add(end_key, is_correct)
        length_key = _shift_key(seg.length_diff)
        if length_key in length_keys:
            by_length.add(length_key, is_correct)

    per_class_gt = {c: acc for c in sorted(gt_class.total) if (acc := gt_class.accuracy(c)) is not None}
    per_class_gen = {c: acc for c in sorted(gen_class.total) if (acc := gen_class.accuracy(c)) is not None}

    per_class_delta: dict[str, float] = {}
    improved: list[str] = []
    dropped: list[str] = []
    unchanged: list[str] = []
    for c in sorted(per_class_gt):
        if c not in per_class_gen:
            unchanged.append(c)  # no generated predictions for this class
            continue
        delta = per_class_gen[c] - per_class_gt[c]
        per_class_delta[c] = delta
        if delta < 0:
            dropped.append(c)
        elif delta > 0:
            improved.append(c)
        else:
            unchanged.append(c)
    for c in sorted(set(per_class_gen) - set(per_class_gt)):
        diagnostics.append(Diagnostic("no_gt_predictions", f"class {c!r} has generated predictions but no ground-truth ones"))

    n_gen_classes = len(per_class_delta)
    fraction_dropped = len(dropped) / n_gen_classes if n_gen_classes else 0.0

    def table(counter: _BinCounter, keys: list[str]) -> dict[str, float | None]:
        return {key: counter.accuracy(key) for key in keys}

    def counts(counter: _BinCounter, keys: list[str]) -> dict[str, tuple[int, int]]:
        return {key: (counter.correct.get(key, 0), counter.total.get(key, 0)) for key in keys}

    cum_keys = [f"{t:.1f}" for t in bins.iou_thresholds]
    bucket_keys = [_iou_bucket_key(lo, hi) for lo, hi in bins.iou_buckets]
    start_keys = [_shift_key(b) for b in bins.shift_bins]
    length_keys_ordered = [_shift_key(b) for b in bins.length_diff_bins]

    report = EvaluationReport(
        overall_gt_accuracy=gt_counts.accuracy("all"),
        overall_gen_accuracy=gen_counts.accuracy("all"),
        n_gt_predictions=gt_counts.total.get("all", 0),
        n_gen_predictions=gen_counts.total.get("all", 0),
        accuracy_by_iou_cumulative=table(by_iou_cum, cum_keys),
        accuracy_by_iou_bucket=table(by_iou_bucket, bucket_keys),
        accuracy_by_start_shift=table(by_start, start_keys),
        accuracy_by_end_shift=table(by_end, start_keys),
        accuracy_by_length_diff=table(by_length, length_keys_ordered),
        per_class_gt_accuracy=per_class_gt,
        per_class_gen_accuracy=per_class_gen,
        per_class_delta=per_class_delta,
        class_changes={"improved": improved, "dropped": dropped, "unchanged": unchanged},
        fraction_classes_dropped=fraction_dropped,
        bin_counts={
            "iou_cumulative": counts(by_iou_cum, cum_keys),
            "iou_bucket": counts(by_iou_bucket, bucket_keys),
            "start_shift": counts(by_start, start_keys),
            "end_shift": counts(by_end, start_keys),
            "length_diff": counts(by_length, length_keys_ordered),
        },
    )
    return report, diagnostics


def verify_binning_consistency(report: EvaluationReport, tol: float = 1e-9) -> None:
    """Cumulative accuracy at t must equal the prediction-weighted average of
    the disjoint buckets above t. Raises AssertionError when it does not."""
    bucket_counts = report.bin_counts["iou_bucket"]
    cum_counts = report.bin_counts["iou_cumulative"]
    buckets = sorted(bucket_counts)  # "(0.5,0.6]" ... sorts by lower edge
    for key, (cum_correct, cum_total) in cum_counts.items():
        t = float(key)
        above = [bucket_counts[b] for b in buckets if float(b[1:b.index(",")]) >= t - 1e-12]
        agg_correct = sum(c for c, _ in above)
        agg_total = sum(n for _, n in above)
        if (agg_correct, agg_total) != (cum_correct, cum_total):
            raise AssertionError(
                f"bucket counts above {t} sum to {(agg_correct, agg_total)}, cumulative has {(cum_correct, cum_total)}"
            )
        acc = report.accuracy_by_iou_cumulative[key]
        if agg_total == 0:
            assert acc is None
            continue
        weighted = sum(
            (report.accuracy_by_iou_bucket[b] or 0.0) * bucket_counts[b][1] for b in buckets
            if float(b[1:b.index(",")]) >= t - 1e-12
        ) / agg_total
        assert acc is not None and math.isclose(acc, weighted, abs_tol=tol), (
            f"cumulative accuracy at {t} is {acc}, weighted bucket average is {weighted}"
        )


# ---------------------------------------------------------------------------
# Report serialization


def _round6(value: float | None) -> float | None:
    return None if value is None else round(value, 6)


def report_to_json(report: EvaluationReport) -> bytes:
    doc = {
        "overall_gt_accuracy": _round6(report.overall_gt_accuracy),
        "overall_gen_accuracy": _round6(report.overall_gen_accuracy),
        "n_gt_predictions": report.n_gt_predictions,
        "n_gen_predictions": report.n_gen_predictions,
        "accuracy_by_iou_cumulative": {k: _round6(v) for k, v in report.accuracy_by_iou_cumulative.items()},
        "accuracy_by_iou_bucket": {k: _round6(v) for k, v in report.accuracy_by_iou_bucket.items()},
        "accuracy_by_start_shift": {k: _round6(v) for k, v in report.accuracy_by_start_shift.items()},
        "accuracy_by_end_shift": {k: _round6(v) for k, v in report.accuracy_by_end_shift.items()},
        "accuracy_by_length_diff": {k: _round6(v) for k, v in report.accuracy_by_length_diff.items()},
        "per_class_gt_accuracy": {k: _round6(v) for k, v in report.per_class_gt_accuracy.items()},
        "per_class_gen_accuracy": {k: _round6(v) for k, v in report.per_class_gen_accuracy.items()},
        "per_class_delta": {k: _round6(v) for k, v in report.per_class_delta.items()},
        "class_changes": report.class_changes,
        "fraction_classes_dropped": _round6(report.fraction_classes_dropped),
        "bin_counts": {table: {k: list(v) for k, v in cells.items()} for table, cells in report.bin_counts.items()},
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def report_from_json(data: bytes) -> EvaluationReport:
    doc = json.loads(data.decode("utf-8"))
    return EvaluationReport(
        overall_gt_accuracy=doc["overall_gt_accuracy"],
        overall_gen_accuracy=doc["overall_gen_accuracy"],
        n_gt_predictions=doc["n_gt_predictions"],
        n_gen_predictions=doc["n_gen_predictions"],
        accuracy_by_iou_cumulative=doc["accuracy_by_iou_cumulative"],
        accuracy_by_iou_bucket=doc["accuracy_by_iou_bucket"],
        accuracy_by_start_shift=doc["accuracy_by_start_shift"],
        accuracy_by_end_shift=doc["accuracy_by_end_shift"],
        accuracy_by_length_diff=doc["accuracy_by_length_diff"],
        per_class_gt_accuracy=doc["per_class_gt_accuracy"],
        per_class_gen_accuracy=doc["per_class_gen_accuracy"],
        per_class_delta=doc["per_class_delta"],
        class_changes=doc["class_changes"],
        fraction_classes_dropped=doc["fraction_classes_dropped"],
        bin_counts={table: {k: tuple(v) for k, v in cells.items()} for table, cells in doc["bin_counts"].items()},
    )


def _write_bin_csv(name: str, table: dict[str, float | None], counts: dict[str, tuple[int, int]]) -> bytes:
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([name, "accuracy", "correct", "total"])
    for key, acc in table.items():
        correct, total = counts[key]
        writer.writerow([key, "" if acc is None else f"{acc:.6f}", correct, total])
    return out.getvalue().encode("utf-8")


def export_report(report: EvaluationReport, outdir) -> list[str]:
    """Write report.json plus one CSV per binned table; returns file names."""
    from pathlib import Path

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def emit(name: str, data: bytes) -> None:
        (out / name).write_bytes(data)
        written.append(name)

    emit("report.json", report_to_json(report))
    emit(
        "accuracy_by_iou_cumulative.csv",
        _write_bin_csv("iou_threshold", report.accuracy_by_iou_cumulative, report.bin_counts["iou_cumulative"]),
    )
    emit(
        "accuracy_by_iou_bucket.csv",
        _write_bin_csv("iou_bucket", report.accuracy_by_iou_bucket, report.bin_counts["iou_bucket"]),
    )
    emit(
        "accuracy_by_start_shift.csv",
        _write_bin_csv("start_shift", report.accuracy_by_start_shift, report.bin_counts["start_shift"]),
    )
    emit(
        "accuracy_by_end_shift.csv",
        _write_bin_csv("end_shift", report.accuracy_by_end_shift, report.bin_counts["end_shift"]),
    )
    emit(
        "accuracy_by_length_diff.csv",
        _write_bin_csv("length_diff", report.accuracy_by_length_diff, report.bin_counts["length_diff"]),
    )
    per_class = _stdio.StringIO()
    writer = csv.writer(per_class, lineterminator="\n")
    writer.writerow(["class", "gt_accuracy", "gen_accuracy", "delta"])
    for c in sorted(report.per_class_gt_accuracy):
        gt_acc = report.per_class_gt_accuracy[c]
        gen_acc = report.per_class_gen_accuracy.get(c)
        delta = report.per_class_delta.get(c)
        writer.writerow(
            [
                c,
                f"{gt_acc:.6f}",
                "" if gen_acc is None else f"{gen_acc:.6f}",
                "" if delta is None else f"{delta:+.6f}",
            ]
        )
    emit("per_class_delta.csv", per_class.getvalue().encode("utf-8"))
    return written
