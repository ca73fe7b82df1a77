import random

import pytest
from hypothesis import given, settings, strategies as st

from boundkit import io
from boundkit.core import ActionClass, AnnotationRecord, RBAnnotation, Schema, TimeInterval, VideoMeta

HEADER = ",".join(io.ANNOTATION_COLUMNS)


def conventional_row(ann_id="a1", start="10.0", end="12.0"):
    return f"{ann_id},v1,pour,oil,ann1,conventional,{start},{end},,,,,i1"


def rubicon_row(ann_id="a2", pre=("9.0", "10.0"), act=("10.0", "12.0"), mirror=("", "")):
    return (
        f"{ann_id},v1,pour,oil,ann2,rubicon,{mirror[0]},{mirror[1]},"
        f"{pre[0]},{pre[1]},{act[0]},{act[1]},i1"
    )


def parse(*rows: str) -> io.ParseResult:
    return io.parse_annotations(("\n".join([HEADER, *rows]) + "\n").encode())


class TestParseAnnotations:
    def test_conventional_row(self):
        result = parse(conventional_row())
        assert not result.diagnostics
        (rec,) = result.records
        assert rec.schema is Schema.CONVENTIONAL
        assert rec.interval == TimeInterval(10.0, 12.0)
        assert rec.action == ActionClass("pour", "oil")
        assert rec.instance_key == "i1"

    def test_rubicon_row_with_adjacency(self):
        result = parse(rubicon_row())
        assert not result.diagnostics
        (rec,) = result.records
        assert rec.schema is Schema.RUBICON
        assert rec.rb.full() == TimeInterval(9.0, 12.0)

    def test_rb_adjacency_violation_is_diagnostic(self):
        result = parse(rubicon_row(act=("10.5", "12.0")))
        assert result.records == []
        (diag,) = result.diagnostics
        assert diag.code == "rb_adjacency"
        assert "0.5" in diag.message
        assert diag.line == 2

    def test_missing_header_is_fatal(self):
        result = io.parse_annotations(conventional_row().encode())
        assert result.fatal is not None
        assert result.records == []

    def test_misordered_header_is_fatal(self):
        cols = list(io.ANNOTATION_COLUMNS)
        cols[0], cols[1] = cols[1], cols[0]
        result = io.parse_annotations((",".join(cols) + "\n").encode())
        assert result.fatal is not None

    def test_malformed_rows_keep_line_numbers(self):
        result = parse(conventional_row(), "not,enough,fields", conventional_row(ann_id="a3", start="bad"))
        assert len(result.records) == 1
        codes = {(d.code, d.line) for d in result.diagnostics}
        assert ("wrong_column_count", 3) in codes
        assert ("bad_row", 4) in codes

    def test_conventional_row_with_rb_fields_rejected(self):
        row = "a1,v1,pour,oil,ann1,conventional,10.0,12.0,9.0,10.0,10.0,12.0,i1"
        result = parse(row)
        assert result.records == []
        assert result.diagnostics[0].code == "bad_row"

    def test_rubicon_mirror_checked(self):
        ok = parse(rubicon_row(mirror=("9.0", "12.0")))
        assert not ok.diagnostics and len(ok.records) == 1
        bad = parse(rubicon_row(mirror=("9.0", "12.5")))
        assert len(bad.records) == 1  # rb columns stay authoritative
        assert bad.diagnostics[0].code == "mirror_mismatch"

    def test_zero_duration_interval_rejected(self):
        result = parse(conventional_row(start="10.0", end="10.0"))
        assert result.records == []
        assert result.diagnostics[0].code == "bad_row"

    @given(st.binary(max_size=400))
    @settings(max_examples=300)
    def test_never_raises_on_arbitrary_bytes(self, data):
        result = io.parse_annotations(data)
        assert isinstance(result, io.ParseResult)

    @given(st.text(max_size=400))
    @settings(max_examples=200)
    def test_never_raises_on_arbitrary_text_after_header(self, text):
        result = io.parse_annotations((HEADER + "\n" + text).encode())
        assert isinstance(result, io.ParseResult)


def random_record(rng: random.Random, index: int) -> AnnotationRecord:
    # Times built from integer milliseconds so serialization at 3 decimal
    # places is lossless.
    schema = rng.choice([Schema.CONVENTIONAL, Schema.RUBICON])
    start_ms = rng.randrange(0, 50_000)
    common = dict(
        annotation_id=f"a{index}",
        video_id=f"v{rng.randrange(5)}",
        action=ActionClass(rng.choice(["pour", "open", "cut"]), rng.choice(["oil", "door", "pepper"])),
        annotator_id=f"ann{rng.randrange(9)}",
        instance_key=f"i{rng.randrange(40)}",
    )
    if schema is Schema.CONVENTIONAL:
        end_ms = start_ms + rng.randrange(1, 30_000)
        return AnnotationRecord(
            schema=schema, interval=TimeInterval(start_ms / 1000, end_ms / 1000), **common
        )
    boundary_ms = start_ms + rng.randrange(1, 10_000)
    end_ms = boundary_ms + rng.randrange(1, 20_000)
    return AnnotationRecord(
        schema=schema,
        rb=RBAnnotation(
            TimeInterval(start_ms / 1000, boundary_ms / 1000),
            TimeInterval(boundary_ms / 1000, end_ms / 1000),
        ),
        **common,
    )


class TestSerializeAnnotations:
    def test_empty_is_header_only(self):
        assert io.serialize_annotations([]) == (HEADER + "\n").encode()

    def test_single_record_two_lines(self):
        result = parse(conventional_row())
        data = io.serialize_annotations(result.records)
        lines = data.decode().splitlines()
        assert len(lines) == 2
        assert lines[1] == "a1,v1,pour,oil,ann1,conventional,10.000,12.000,,,,,i1"

    def test_times_have_three_decimals(self):
        result = parse(rubicon_row())
        line = io.serialize_annotations(result.records).decode().splitlines()[1]
        assert ",9.000,10.000,10.000,12.000," in line

    def test_round_trip_identity_randomized(self):
        rng = random.Random(20_240)
        records = [random_record(rng, i) for i in range(1000)]
        reparsed = io.parse_annotations(io.serialize_annotations(records))
        assert reparsed.fatal is None
        assert not reparsed.diagnostics
        assert reparsed.records == records

    def test_serialization_deterministic(self):
        rng = random.Random(7)
        records = [random_record(rng, i) for i in range(50)]
        assert io.serialize_annotations(records) == io.serialize_annotations(list(records))


class TestPredictions:
    def test_basic_row(self):
        data = "segment_id,predicted_verb,predicted_noun,score\ns1,pour,oil,0.9\n"
        result = io.parse_predictions(data.encode())
        (pred,) = result.records
        assert pred.segment_id == "s1"
        assert pred.action == ActionClass("pour", "oil")
        assert pred.score == pytest.approx(0.9)

    def test_missing_score_accepted(self):
        data = "segment_id,predicted_verb,predicted_noun,score\ns1,pour,oil,\ns2,open,door\n"
        result = io.parse_predictions(data.encode())
        assert [p.score for p in result.records] == [None, None]
        assert not result.diagnostics

    def test_bad_score_is_diagnostic(self):
        data = "segment_id,predicted_verb,predicted_noun,score\ns1,pour,oil,high\n"
        result = io.parse_predictions(data.encode())
        assert result.records == []
        assert result.diagnostics[0].code == "bad_row"

    def test_duplicate_prediction_keeps_first(self):
        data = "segment_id,predicted_verb,predicted_noun,score\ns1,pour,oil,\ns1,open,door,\n"
        result = io.parse_predictions(data.encode())
        assert len(result.records) == 1
        assert result.records[0].action == ActionClass("pour", "oil")
        assert result.diagnostics[0].code == "duplicate_prediction"

    def test_round_trip(self):
        preds = [io.Prediction("s1", ActionClass("pour", "oil"), 0.25), io.Prediction("s2", ActionClass("open", "door"))]
        result = io.parse_predictions(io.serialize_predictions(preds))
        assert result.records == preds


class TestValidateRecords:
    def test_out_of_bounds_flagged(self):
        result = parse(conventional_row(start="10.0", end="12.0"))
        videos = {"v1": VideoMeta("v1", duration=11.0, frame_rate=30)}
        diags = io.validate_records(result.records, videos)
        assert [d.code for d in diags] == ["out_of_bounds"]

    def test_within_bounds_clean(self):
        result = parse(conventional_row())
        videos = {"v1": VideoMeta("v1", duration=100.0, frame_rate=30)}
        assert io.validate_records(result.records, videos) == []

    def test_duplicate_annotation_id(self):
        result = parse(conventional_row(), conventional_row())
        diags = io.validate_records(result.records)
        assert [d.code for d in diags] == ["duplicate_annotation_id"]

    def test_unknown_video(self):
        result = parse(conventional_row())
        diags = io.validate_records(result.records, {"other": VideoMeta("other", 5.0, 30)})
        assert [d.code for d in diags] == ["unknown_video"]


class TestRecordJson:
    def test_round_trip_both_schemas(self):
        rng = random.Random(99)
        for i in range(200):
            rec = random_record(rng, i)
            assert io.record_from_json(io.record_to_json(rec)) == rec

    def test_adjacency_violation_raises(self):
        doc = {
            "annotation_id": "a1",
            "video_id": "v1",
            "class": "pour oil",
            "annotator_id": "x",
            "schema": "rubicon",
            "instance_key": "i1",
            "rb": {"pre_actional": {"start": 9, "end": 10}, "actional": {"start": 10.5, "end": 12}},
        }
        with pytest.raises(ValueError, match="RB adjacency"):
            io.record_from_json(doc)

    def test_missing_field_raises(self):
        with pytest.raises(ValueError):
            io.record_from_json({"annotation_id": "a1"})


class TestVideosAndTasks:
    def test_videos_round_trip(self):
        videos = [VideoMeta("v1", 100.0, 30.0), VideoMeta("v2", 63.5, 29.97)]
        result = io.parse_videos(io.serialize_videos(videos))
        assert not result.diagnostics
        assert [v.video_id for v in result.records] == ["v1", "v2"]
        assert result.records[1].frame_rate == pytest.approx(29.97)

    def test_tasks(self):
        data = "video_id,instance_key,verb,noun\nv1,i1,pour,oil\n"
        result = io.parse_tasks(data.encode())
        (task,) = result.records
        assert task.action == ActionClass("pour", "oil")


class TestProjectConfig:
    def test_defaults(self):
        config = io.load_config(b"{}")
        assert config.perturbation.delta_cap == 2.0
        assert config.perturbation.step == 0.5
        assert config.perturbation.min_iou == 0.5
        assert config.folds.k == 5
        assert config.augmentation.factor == 2.0
        assert config.gate_max_retries == 2

    def test_round_trip(self):
        config = io.load_config(
            b"""
            {
              "perturbation": {"delta_cap": 1.0, "step": 0.25, "min_iou": 0.6},
              "folds": {"k": 3, "seed": 11, "stratified": false},
              "augmentation": {"factor": 1.5, "seed": 4},
              "control_questions": [
                {"prompt": "Which phase fulfils the goal?", "choices": ["first", "second"], "correct_index": 1}
              ]
            }
            """
        )
        assert io.load_config(io.dump_config(config)) == config

    @pytest.mark.parametrize(
        "doc",
        [
            '{"perturbation": {"delta_cap": 0}}',
            '{"perturbation": {"step": 3.0}}',
            '{"perturbation": {"min_iou": 0}}',
            '{"perturbation": {"min_iou": 1.5}}',
            '{"folds": {"k": 1}}',
            '{"augmentation": {"factor": 0.5}}',
            '{"control_questions": [{"prompt": "p", "choices": ["only"], "correct_index": 0}]}',
            '{"control_questions": [{"prompt": "p", "choices": ["a", "b"], "correct_index": 5}]}',
            "not json",
        ],
    )
    def test_invariant_violations(self, doc):
        with pytest.raises(io.ConfigError):
            io.load_config(doc.encode())

    def test_with_seed_overrides_everything(self):
        config = io.load_config(b'{"folds": {"seed": 5}, "augmentation": {"seed": 6}}').with_seed(42)
        assert config.folds.seed == 42
        assert config.augmentation.seed == 42
