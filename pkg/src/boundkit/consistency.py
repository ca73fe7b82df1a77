"""Inter-annotator agreement statistics over multiply-annotated instances.

For every object-interaction instance labeled by k annotators, the IoU of
all C(k, 2) annotation pairs is computed; instances aggregate into per-class
and overall pools so box-plot style summaries can be exported.
"""

from __future__ import annotations

import csv
import enum
import io as _stdio
import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import ActionClass, AnnotationRecord, Schema, TimeInterval, iou
from .diagnostics import Diagnostic


class SchemeSelector(enum.Enum):
    """Which interval of a record enters the agreement computation."""

    CONVENTIONAL = "conventional"
    RB_FULL = "rb_full"
    RB_PRE = "rb_pre"
    RB_ACT = "rb_act"


def select_interval(record: AnnotationRecord, selector: SchemeSelector) -> TimeInterval | None:
    """The record's interval under the selector, or None on schema mismatch."""
    if selector is SchemeSelector.CONVENTIONAL:
        if record.schema is not Schema.CONVENTIONAL:
            return None
        return record.interval
    if record.schema is not Schema.RUBICON:
        return None
    assert record.rb is not None
    if selector is SchemeSelector.RB_FULL:
        return record.rb.full()
    if selector is SchemeSelector.RB_PRE:
        return record.rb.pre_actional
    return record.rb.actional


def pairwise_iou(intervals: list[TimeInterval]) -> list[float]:
    """IoU of every unordered pair, in lexicographic index order."""
    if len(intervals) < 2:
        raise ValueError("instance not multiply annotated")
    return [iou(a, b) for a, b in itertools.combinations(intervals, 2)]


def _quartiles(values: list[float]) -> tuple[float, float, float, float, float]:
    # Linear interpolation between order statistics, median inclusive.
    q = np.quantile(np.asarray(values, dtype=float), [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return tuple(float(x) for x in q)  # type: ignore[return-value]


@dataclass(frozen=True)
class ConsistencyStats:
    """Agreement statistics for one instance, one class pool, or one overall pool."""

    action: ActionClass | None
    instance_key: str | None
    scheme: SchemeSelector
    pair_ious: tuple[float, ...]
    mean: float
    std: float
    quartiles: tuple[float, float, float, float, float]

    @property
    def n_pairs(self) -> int:
        return len(self.pair_ious)

    @classmethod
    def from_pairs(
        cls,
        pair_ious: list[float],
        scheme: SchemeSelector,
        action: ActionClass | None = None,
        instance_key: str | None = None,
    ) -> "ConsistencyStats":
        if not pair_ious:
            raise ValueError("cannot summarize an empty pair list")
        values = np.asarray(pair_ious, dtype=float)
        return cls(
            action=action,
            instance_key=instance_key,
            scheme=scheme,
            pair_ious=tuple(pair_ious),
            mean=float(values.mean()),
            std=float(values.std()),  # population formula
            quartiles=_quartiles(pair_ious),
        )


@dataclass
class ConsistencySummary:
    scheme: SchemeSelector
    instance_stats: list[ConsistencyStats]
    class_stats: list[ConsistencyStats]
    overall: ConsistencyStats | None
    diagnostics: list[Diagnostic] = field(default_factory=list)


def summarize(selector: SchemeSelector, records: list[AnnotationRecord]) -> ConsistencySummary:
    """Per-instance agreement stats plus per-class and overall pooled pools.

    Instances whose records do not match the selector's schema, or that carry
    fewer than two matching annotations, are skipped with a diagnostic.
    """
    by_instance: dict[str, list[AnnotationRecord]] = {}
    for rec in records:
        by_instance.setdefault(rec.instance_key, []).append(rec)

    instance_stats: list[ConsistencyStats] = []
    diagnostics: list[Diagnostic] = []
    class_pools: dict[str, list[float]] = {}
    class_actions: dict[str, ActionClass] = {}

    for key in sorted(by_instance):
        group = by_instance[key]
        actions = {str(rec.action) for rec in group}
        if len(actions) > 1:
            diagnostics.append(
                Diagnostic("mixed_classes", f"instance {key!r} mixes classes {sorted(actions)}; skipped")
            )
            continue
        matching: list[tuple[AnnotationRecord, TimeInterval]] = []
        mismatched = 0
        for rec in group:
            interval = select_interval(rec, selector)
            if interval is None:
                mismatched += 1
            else:
                matching.append((rec, interval))
        if mismatched:
            diagnostics.append(
                Diagnostic(
                    "schema_mismatch",
                    f"instance {key!r}: {mismatched} annotation(s) do not match selector {selector.value}",
                )
            )
        if len(matching) < 2:
            diagnostics.append(
                Diagnostic("not_multiply_annotated", f"instance {key!r} has {len(matching)} usable annotation(s); skipped")
            )
            continue
        action = matching[0][0].action
        pairs = pairwise_iou([interval for _, interval in matching])
        instance_stats.append(
            ConsistencyStats.from_pairs(pairs, selector, action=action, instance_key=key)
        )
        class_pools.setdefault(str(action), []).extend(pairs)
        class_actions.setdefault(str(action), action)

    class_stats = [
        ConsistencyStats.from_pairs(class_pools[name], selector, action=class_actions[name])
        for name in sorted(class_pools)
    ]
    all_pairs = [p for name in sorted(class_pools) for p in class_pools[name]]
    overall = ConsistencyStats.from_pairs(all_pairs, selector) if all_pairs else None
    return ConsistencySummary(selector, instance_stats, class_stats, overall, diagnostics)


def export_boxplot_data(stats: list[ConsistencyStats]) -> bytes:
    """Box-plot CSV over class-level stats: one row per (class, scheme)."""
    if not stats:
        raise ValueError("no consistency stats to export")
    rows = sorted(stats, key=lambda s: (str(s.action) if s.action else "", s.scheme.value))
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["class", "scheme", "min", "q1", "median", "q3", "max", "n_pairs"])
    for s in rows:
        writer.writerow(
            [
                str(s.action) if s.action else "(all)",
                s.scheme.value,
                *(f"{q:.6f}" for q in s.quartiles),
                s.n_pairs,
            ]
        )
    return out.getvalue().encode("utf-8")


def export_instance_data(summary: ConsistencySummary) -> bytes:
    """Instance-level CSV with full-precision pair lists, so pooled statistics
    can be recomputed exactly from the export."""
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["class", "instance_key", "scheme", "n_pairs", "mean", "std", "min", "q1", "median", "q3", "max", "pair_ious"]
    )
    for s in summary.instance_stats:
        writer.writerow(
            [
                str(s.action),
                s.instance_key,
                s.scheme.value,
                s.n_pairs,
                repr(s.mean),
                repr(s.std),
                *(repr(q) for q in s.quartiles),
                ";".join(repr(p) for p in s.pair_ious),
            ]
        )
    return out.getvalue().encode("utf-8")
