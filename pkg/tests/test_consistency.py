import numpy as np
import pytest

from boundkit.consistency import (
    ConsistencyStats,
    SchemeSelector,
    export_boxplot_data,
    export_instance_data,
    pairwise_iou,
    select_interval,
    summarize,
)
from boundkit.core import ActionClass, AnnotationRecord, RBAnnotation, Schema, TimeInterval


def conventional(ann_id, annotator, start, end, instance="i1", action=("pour", "oil")):
    return AnnotationRecord(
        annotation_id=ann_id,
        video_id="v1",
        action=ActionClass(*action),
        annotator_id=annotator,
        schema=Schema.CONVENTIONAL,
        instance_key=instance,
        interval=TimeInterval(start, end),
    )


def rubicon(ann_id, annotator, pre, act, instance="i1", action=("pour", "oil")):
    return AnnotationRecord(
        annotation_id=ann_id,
        video_id="v1",
        action=ActionClass(*action),
        annotator_id=annotator,
        schema=Schema.RUBICON,
        instance_key=instance,
        rb=RBAnnotation(TimeInterval(*pre), TimeInterval(*act)),
    )


class TestPairwiseIou:
    def test_identical_pair(self):
        assert pairwise_iou([TimeInterval(0, 10), TimeInterval(0, 10)]) == [1.0]

    def test_disjoint_pair(self):
        assert pairwise_iou([TimeInterval(0, 10), TimeInterval(20, 30)]) == [0.0]

    def test_three_annotators_lexicographic(self):
        pairs = pairwise_iou([TimeInterval(0, 10), TimeInterval(0, 10), TimeInterval(5, 15)])
        assert pairs[0] == 1.0
        assert pairs[1] == pytest.approx(1 / 3, abs=1e-12)
        assert pairs[2] == pytest.approx(1 / 3, abs=1e-12)
        assert sum(pairs) / 3 == pytest.approx(5 / 9, abs=1e-9)

    def test_single_annotation_rejected(self):
        with pytest.raises(ValueError, match="not multiply annotated"):
            pairwise_iou([TimeInterval(0, 10)])

    def test_pair_count_is_k_choose_2(self):
        for k in range(2, 8):
            intervals = [TimeInterval(i, i + 10) for i in range(k)]
            assert len(pairwise_iou(intervals)) == k * (k - 1) // 2


class TestStats:
    def test_population_std_and_mean(self):
        stats = ConsistencyStats.from_pairs([0.2, 0.4, 0.9], SchemeSelector.CONVENTIONAL)
        values = np.array([0.2, 0.4, 0.9])
        assert stats.mean == pytest.approx(values.mean())
        assert stats.std == pytest.approx(values.std(ddof=0))

    def test_quartiles_linear_interpolation(self):
        stats = ConsistencyStats.from_pairs([0.0, 0.5, 1.0], SchemeSelector.CONVENTIONAL)
        assert stats.quartiles == pytest.approx((0.0, 0.25, 0.5, 0.75, 1.0))

    def test_singleton_distribution(self):
        stats = ConsistencyStats.from_pairs([1.0], SchemeSelector.CONVENTIONAL)
        assert stats.quartiles == (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ConsistencyStats.from_pairs([], SchemeSelector.CONVENTIONAL)


class TestSelectInterval:
    def test_rb_selectors(self):
        rec = rubicon("a1", "x", (0, 5), (5, 10))
        assert select_interval(rec, SchemeSelector.RB_PRE) == TimeInterval(0, 5)
        assert select_interval(rec, SchemeSelector.RB_ACT) == TimeInterval(5, 10)
        assert select_interval(rec, SchemeSelector.RB_FULL) == TimeInterval(0, 10)
        assert select_interval(rec, SchemeSelector.CONVENTIONAL) is None

    def test_conventional_selector(self):
        rec = conventional("a1", "x", 3, 9)
        assert select_interval(rec, SchemeSelector.CONVENTIONAL) == TimeInterval(3, 9)
        assert select_interval(rec, SchemeSelector.RB_FULL) is None


class TestSummarize:
    def test_identical_rb_annotators_all_selectors_mean_one(self):
        records = [
            rubicon("a1", "x", (0, 5), (5, 10)),
            rubicon("a2", "y", (0, 5), (5, 10)),
        ]
        for selector in (SchemeSelector.RB_PRE, SchemeSelector.RB_ACT, SchemeSelector.RB_FULL):
            summary = summarize(selector, records)
            (inst,) = summary.instance_stats
            assert inst.mean == 1.0
            assert summary.overall.mean == 1.0

    def test_pooled_class_and_overall(self):
        records = [
            conventional("a1", "x", 0, 10, instance="i1"),
            conventional("a2", "y", 0, 10, instance="i1"),
            conventional("a3", "x", 0, 10, instance="i2", action=("open", "door")),
            conventional("a4", "y", 5, 15, instance="i2", action=("open", "door")),
        ]
        summary = summarize(SchemeSelector.CONVENTIONAL, records)
        assert len(summary.instance_stats) == 2
        assert len(summary.class_stats) == 2
        assert summary.overall.n_pairs == 2
        assert summary.overall.mean == pytest.approx((1.0 + 1 / 3) / 2)

    def test_schema_mismatch_skips_instance(self):
        records = [
            conventional("a1", "x", 0, 10),
            conventional("a2", "y", 0, 10),
        ]
        summary = summarize(SchemeSelector.RB_FULL, records)
        assert summary.instance_stats == []
        codes = {d.code for d in summary.diagnostics}
        assert "schema_mismatch" in codes
        assert "not_multiply_annotated" in codes

    def test_single_annotation_instance_skipped(self):
        summary = summarize(SchemeSelector.CONVENTIONAL, [conventional("a1", "x", 0, 10)])
        assert summary.instance_stats == []
        assert summary.diagnostics[0].code == "not_multiply_annotated"

    def test_mixed_classes_skipped(self):
        records = [
            conventional("a1", "x", 0, 10),
            conventional("a2", "y", 0, 10, action=("open", "door")),
        ]
        summary = summarize(SchemeSelector.CONVENTIONAL, records)
        assert summary.instance_stats == []
        assert summary.diagnostics[0].code == "mixed_classes"

    def test_duplicating_identical_annotator_keeps_mean_one(self):
        records = [
            conventional("a1", "x", 0, 10),
            conventional("a2", "y", 0, 10),
        ]
        base = summarize(SchemeSelector.CONVENTIONAL, records)
        more = summarize(SchemeSelector.CONVENTIONAL, records + [conventional("a3", "z", 0, 10)])
        assert base.overall.mean == 1.0
        assert more.overall.mean == 1.0
        assert more.overall.n_pairs == 3

    def test_rb_full_duration_additivity(self):
        records = [
            rubicon("a1", "x", (0, 4), (4, 10)),
            rubicon("a2", "y", (1, 5), (5, 9)),
        ]
        summary = summarize(SchemeSelector.RB_FULL, records)
        for rec in records:
            full = rec.rb.full()
            assert full.duration() == pytest.approx(
                rec.rb.pre_actional.duration() + rec.rb.actional.duration()
            )
        assert summary.instance_stats[0].n_pairs == 1


class TestExport:
    def make_summary(self):
        records = [
            conventional("a1", "x", 0, 10, instance="i1", action=("pour", "oil")),
            conventional("a2", "y", 0, 10, instance="i1", action=("pour", "oil")),
            conventional("a3", "x", 0, 8, instance="i2", action=("cut", "pepper")),
            conventional("a4", "y", 2, 8, instance="i2", action=("cut", "pepper")),
        ]
        return summarize(SchemeSelector.CONVENTIONAL, records)

    def test_singleton_all_quartiles_equal(self):
        stats = ConsistencyStats.from_pairs([1.0], SchemeSelector.CONVENTIONAL, action=ActionClass("pour", "oil"))
        lines = export_boxplot_data([stats]).decode().splitlines()
        assert lines[1] == "pour oil,conventional,1.000000,1.000000,1.000000,1.000000,1.000000,1"

    def test_rows_sorted_by_class_then_scheme(self):
        summary = self.make_summary()
        lines = export_boxplot_data(summary.class_stats).decode().splitlines()
        assert lines[0] == "class,scheme,min,q1,median,q3,max,n_pairs"
        assert [line.split(",")[0] for line in lines[1:]] == ["cut pepper", "pour oil"]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            export_boxplot_data([])

    def test_instance_export_pair_lists_recompute(self):
        summary = self.make_summary()
        lines = export_instance_data(summary).decode().splitlines()
        pooled = []
        for line in lines[1:]:
            pairs = [float(p) for p in line.split(",")[-1].split(";")]
            pooled.extend(pairs)
        values = np.array(sorted(pooled))
        expected = np.array(sorted(summary.overall.pair_ious))
        assert np.array_equal(values, expected)
        assert values.mean() == summary.overall.mean
        assert values.std() == summary.overall.std
