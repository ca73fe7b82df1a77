"""Parsing, validation and serialization of every file format the toolkit
reads or writes: annotation CSVs, prediction CSVs, video metadata, task
lists, generated-segment CSVs, fold assignments and the project config.

Parsers never raise on malformed input; they return diagnostics. A missing
or misordered header is reported as a fatal diagnostic and parsing stops.
"""

from __future__ import annotations

import csv
import io as _stdio
import json
import math
from dataclasses import dataclass, field, replace

from .core import (
    SECONDS_TOL,
    ActionClass,
    AnnotationRecord,
    RBAnnotation,
    Schema,
    TimeInterval,
    VideoMeta,
)
from .diagnostics import Diagnostic, Severity
from .harness import FoldSplit
from .perturb import GeneratedSegment, PerturbationConfig

ANNOTATION_COLUMNS = (
    "annotation_id",
    "video_id",
    "verb",
    "noun",
    "annotator_id",
    "schema",
    "start_sec",
    "end_sec",
    "pre_start_sec",
    "pre_end_sec",
    "act_start_sec",
    "act_end_sec",
    "instance_key",
)

PREDICTION_COLUMNS = ("segment_id", "predicted_verb", "predicted_noun", "score")

VIDEO_COLUMNS = ("video_id", "duration", "frame_rate")

TASK_COLUMNS = ("video_id", "instance_key", "verb", "noun")

SEGMENT_COLUMNS = (
    "segment_id",
    "source_annotation_id",
    "start_sec",
    "end_sec",
    "iou",
    "start_shift",
    "end_shift",
    "length_diff",
)

FOLD_COLUMNS = ("annotation_id", "fold")


@dataclass
class ParseResult:
    """Records parsed from one file plus everything that went wrong."""

    records: list
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def fatal(self) -> Diagnostic | None:
        for d in self.diagnostics:
            if d.severity is Severity.FATAL:
                return d
        return None


def format_seconds(t: float) -> str:
    return f"{t:.3f}"


def _fatal(code: str, message: str, line: int | None = None) -> ParseResult:
    return ParseResult([], [Diagnostic(code, message, line, Severity.FATAL)])


def _decode(data: bytes) -> tuple[str, list[Diagnostic]]:
    try:
        return data.decode("utf-8"), []
    except UnicodeDecodeError as exc:
        text = data.decode("utf-8", errors="replace")
        return text, [Diagnostic("invalid_utf8", f"not valid UTF-8: {exc}")]


def _read_rows(text: str, expected_header: tuple[str, ...]) -> tuple[list[tuple[int, list[str]]], ParseResult | None]:
    """Return (line, row) pairs after the header, or a fatal ParseResult."""
    reader = csv.reader(_stdio.StringIO(text))
    rows: list[tuple[int, list[str]]] = []
    try:
        header = next(reader, None)
        if header is None:
            return [], _fatal("missing_header", f"empty file, expected header {','.join(expected_header)}")
        if [h.strip() for h in header] != list(expected_header):
            return [], _fatal(
                "bad_header",
                f"expected columns {','.join(expected_header)}, got {','.join(header)}",
                line=1,
            )
        for row in reader:
            rows.append((reader.line_num, row))
    except csv.Error as exc:
        return [], _fatal("csv_error", f"unreadable CSV: {exc}")
    return rows, None


def _parse_time(raw: str, what: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{what} is not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite, got {raw!r}")
    return value


def _parse_schema(raw: str) -> Schema:
    try:
        return Schema(raw.strip().lower())
    except ValueError:
        raise ValueError(f"unknown schema {raw!r}, expected conventional or rubicon") from None


# ---------------------------------------------------------------------------
# Annotation files


def parse_annotations(data: bytes) -> ParseResult:
    """Parse an annotation CSV into AnnotationRecords.

    Well-formed rows become records; malformed rows become warning
    diagnostics carrying the line number. RB adjacency violations are
    diagnostics, never silent fixes.
    """
    text, diagnostics = _decode(data)
    rows, failure = _read_rows(text, ANNOTATION_COLUMNS)
    if failure is not None:
        failure.diagnostics = diagnostics + failure.diagnostics
        return failure

    records: list[AnnotationRecord] = []
    for line, row in rows:
        if not row:
            continue
        if len(row) != len(ANNOTATION_COLUMNS):
            diagnostics.append(
                Diagnostic("wrong_column_count", f"expected {len(ANNOTATION_COLUMNS)} fields, got {len(row)}", line)
            )
            continue
        try:
            records.append(_row_to_record(row, line, diagnostics))
        except ValueError as exc:
            code = "rb_adjacency" if "RB adjacency" in str(exc) else "bad_row"
            diagnostics.append(Diagnostic(code, str(exc), line))
    return ParseResult(records, diagnostics)


def _row_to_record(row: list[str], line: int, diagnostics: list[Diagnostic]) -> AnnotationRecord:
    (ann_id, video_id, verb, noun, annotator_id, schema_raw,
     start_raw, end_raw, pre_start_raw, pre_end_raw, act_start_raw, act_end_raw,
     instance_key) = (f.strip() for f in row)
    action = ActionClass(verb, noun)
    schema = _parse_schema(schema_raw)

    interval: TimeInterval | None = None
    rb: RBAnnotation | None = None
    if schema is Schema.CONVENTIONAL:
        if any((pre_start_raw, pre_end_raw, act_start_raw, act_end_raw)):
            raise ValueError("conventional row must leave the four RB columns empty")
        if not start_raw or not end_raw:
            raise ValueError("conventional row must populate start_sec and end_sec")
        interval = TimeInterval(_parse_time(start_raw, "start_sec"), _parse_time(end_raw, "end_sec"))
    else:
        if not all((pre_start_raw, pre_end_raw, act_start_raw, act_end_raw)):
            raise ValueError("rubicon row must populate the four RB columns")
        rb = RBAnnotation(
            pre_actional=TimeInterval(_parse_time(pre_start_raw, "pre_start_sec"), _parse_time(pre_end_raw, "pre_end_sec")),
            actional=TimeInterval(_parse_time(act_start_raw, "act_start_sec"), _parse_time(act_end_raw, "act_end_sec")),
        )
        # start/end may mirror full(); the RB columns stay authoritative.
        if start_raw or end_raw:
            if not (start_raw and end_raw):
                raise ValueError("rubicon row must mirror both start_sec and end_sec or neither")
            full = rb.full()
            mirrored_start = _parse_time(start_raw, "start_sec")
            mirrored_end = _parse_time(end_raw, "end_sec")
            if abs(mirrored_start - full.start) > SECONDS_TOL or abs(mirrored_end - full.end) > SECONDS_TOL:
                diagnostics.append(
                    Diagnostic(
                        "mirror_mismatch",
                        f"start_sec/end_sec [{mirrored_start}, {mirrored_end}] do not mirror "
                        f"full() [{full.start}, {full.end}]",
                        line,
                    )
                )
    return AnnotationRecord(
        annotation_id=ann_id,
        video_id=video_id,
        action=action,
        annotator_id=annotator_id,
        schema=schema,
        instance_key=instance_key,
        interval=interval,
        rb=rb,
    )


def serialize_annotations(records: list[AnnotationRecord]) -> bytes:
    """Deterministic CSV serialization; times carry exactly 3 decimal places.

    parse_annotations(serialize_annotations(records)) == records for records
    whose times sit on the millisecond grid.
    """
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ANNOTATION_COLUMNS)
    for rec in records:
        if rec.schema is Schema.CONVENTIONAL:
            assert rec.interval is not None
            times = [format_seconds(rec.interval.start), format_seconds(rec.interval.end), "", "", "", ""]
        else:
            assert rec.rb is not None
            times = [
                "",
                "",
                format_seconds(rec.rb.pre_actional.start),
                format_seconds(rec.rb.pre_actional.end),
                format_seconds(rec.rb.actional.start),
                format_seconds(rec.rb.actional.end),
            ]
        writer.writerow(
            [rec.annotation_id, rec.video_id, rec.action.verb, rec.action.noun,
             rec.annotator_id, rec.schema.value, *times, rec.instance_key]
        )
    return out.getvalue().encode("utf-8")


def validate_records(
    records: list[AnnotationRecord], videos: dict[str, VideoMeta] | None = None
) -> list[Diagnostic]:
    """Cross-record and cross-file checks on already-parsed records."""
    diagnostics: list[Diagnostic] = []
    seen: dict[str, int] = {}
    for i, rec in enumerate(records):
        if rec.annotation_id in seen:
            diagnostics.append(
                Diagnostic(
                    "duplicate_annotation_id",
                    f"annotation_id {rec.annotation_id!r} already used; later record supersedes",
                )
            )
        seen[rec.annotation_id] = i
        if videos is not None:
            meta = videos.get(rec.video_id)
            if meta is None:
                diagnostics.append(
                    Diagnostic("unknown_video", f"annotation {rec.annotation_id}: video {rec.video_id!r} has no metadata")
                )
            elif rec.span().end > meta.duration + SECONDS_TOL:
                diagnostics.append(
                    Diagnostic(
                        "out_of_bounds",
                        f"annotation {rec.annotation_id}: interval ends at {rec.span().end} "
                        f"but video {rec.video_id} lasts {meta.duration} s",
                    )
                )
    return diagnostics


# ---------------------------------------------------------------------------
# Prediction files


@dataclass(frozen=True)
class Prediction:
    segment_id: str
    action: ActionClass
    score: float | None = None


def parse_predictions(data: bytes) -> ParseResult:
    text, diagnostics = _decode(data)
    rows, failure = _read_rows(text, PREDICTION_COLUMNS)
    if failure is not None:
        failure.diagnostics = diagnostics + failure.diagnostics
        return failure

    predictions: list[Prediction] = []
    seen: set[str] = set()
    for line, row in rows:
        if not row:
            continue
        if len(row) not in (3, 4):
            diagnostics.append(Diagnostic("wrong_column_count", f"expected 3 or 4 fields, got {len(row)}", line))
            continue
        seg_id, verb, noun = (f.strip() for f in row[:3])
        score_raw = row[3].strip() if len(row) == 4 else ""
        try:
            if not seg_id:
                raise ValueError("segment_id must be non-empty")
            action = ActionClass(verb, noun)
            score = _parse_time(score_raw, "score") if score_raw else None
        except ValueError as exc:
            diagnostics.append(Diagnostic("bad_row", str(exc), line))
            continue
        if seg_id in seen:
            diagnostics.append(Diagnostic("duplicate_prediction", f"segment {seg_id!r} predicted twice; keeping first", line))
            continue
        seen.add(seg_id)
        predictions.append(Prediction(seg_id, action, score))
    return ParseResult(predictions, diagnostics)


def serialize_predictions(predictions: list[Prediction]) -> bytes:
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PREDICTION_COLUMNS)
    for p in predictions:
        score = "" if p.score is None else f"{p.score:.6f}"
        writer.writerow([p.segment_id, p.action.verb, p.action.noun, score])
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# Video metadata and task lists


def parse_videos(data: bytes) -> ParseResult:
    text, diagnostics = _decode(data)
    rows, failure = _read_rows(text, VIDEO_COLUMNS)
    if failure is not None:
        failure.diagnostics = diagnostics + failure.diagnostics
        return failure
    videos: list[VideoMeta] = []
    for line, row in rows:
        if not row:
            continue
        if len(row) != len(VIDEO_COLUMNS):
            diagnostics.append(Diagnostic("wrong_column_count", f"expected {len(VIDEO_COLUMNS)} fields, got {len(row)}", line))
            continue
        try:
            videos.append(
                VideoMeta(
                    video_id=row[0].strip(),
                    duration=_parse_time(row[1], "duration"),
                    frame_rate=_parse_time(row[2], "frame_rate"),
                )
            )
        except ValueError as exc:
            diagnostics.append(Diagnostic("bad_row", str(exc), line))
    return ParseResult(videos, diagnostics)


def serialize_videos(videos: list[VideoMeta]) -> bytes:
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(VIDEO_COLUMNS)
    for v in videos:
        writer.writerow([v.video_id, format_seconds(v.duration), f"{v.frame_rate:g}"])
    return out.getvalue().encode("utf-8")


@dataclass(frozen=True)
class AnnotationTask:
    video_id: str
    instance_key: str
    action: ActionClass


def parse_tasks(data: bytes) -> ParseResult:
    text, diagnostics = _decode(data)
    rows, failure = _read_rows(text, TASK_COLUMNS)
    if failure is not None:
        failure.diagnostics = diagnostics + failure.diagnostics
        return failure
    tasks: list[AnnotationTask] = []
    for line, row in rows:
        if not row:
            continue
        if len(row) != len(TASK_COLUMNS):
            diagnostics.append(Diagnostic("wrong_column_count", f"expected {len(TASK_COLUMNS)} fields, got {len(row)}", line))
            continue
        try:
            tasks.append(AnnotationTask(row[0].strip(), row[1].strip(), ActionClass(row[2].strip(), row[3].strip())))
        except ValueError as exc:
            diagnostics.append(Diagnostic("bad_row", str(exc), line))
    return ParseResult(tasks, diagnostics)


# ---------------------------------------------------------------------------
# Generated segments


def serialize_segments(segments: list[GeneratedSegment]) -> bytes:
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SEGMENT_COLUMNS)
    for seg in segments:
        writer.writerow(
            [
                seg.segment_id,
                seg.source_annotation_id,
                format_seconds(seg.interval.start),
                format_seconds(seg.interval.end),
                f"{seg.iou_vs_gt:.6f}",
                format_seconds(seg.start_shift),
                format_seconds(seg.end_shift),
                format_seconds(seg.length_diff),
            ]
        )
    return out.getvalue().encode("utf-8")


def parse_segments(data: bytes) -> ParseResult:
    text, diagnostics = _decode(data)
    rows, failure = _read_rows(text, SEGMENT_COLUMNS)
    if failure is not None:
        failure.diagnostics = diagnostics + failure.diagnostics
        return failure
    segments: list[GeneratedSegment] = []
    seen: set[str] = set()
    for line, row in rows:
        if not row:
            continue
        if len(row) != len(SEGMENT_COLUMNS):
            diagnostics.append(Diagnostic("wrong_column_count", f"expected {len(SEGMENT_COLUMNS)} fields, got {len(row)}", line))
            continue
        try:
            seg = GeneratedSegment(
                segment_id=row[0].strip(),
                source_annotation_id=row[1].strip(),
                interval=TimeInterval(_parse_time(row[2], "start_sec"), _parse_time(row[3], "end_sec")),
                iou_vs_gt=_parse_time(row[4], "iou"),
                start_shift=_parse_time(row[5], "start_shift"),
                end_shift=_parse_time(row[6], "end_shift"),
                length_diff=_parse_time(row[7], "length_diff"),
            )
        except ValueError as exc:
            diagnostics.append(Diagnostic("bad_row", str(exc), line))
            continue
        if seg.segment_id in seen:
            diagnostics.append(Diagnostic("duplicate_segment_id", f"segment {seg.segment_id!r} repeated", line))
            continue
        seen.add(seg.segment_id)
        segments.append(seg)
    return ParseResult(segments, diagnostics)


# ---------------------------------------------------------------------------
# Fold assignments


def serialize_folds(split: FoldSplit) -> bytes:
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(FOLD_COLUMNS)
    for ann_id in sorted(split.assignments):
        writer.writerow([ann_id, split.assignments[ann_id]])
    return out.getvalue().encode("utf-8")


def parse_folds(data: bytes) -> ParseResult:
    text, diagnostics = _decode(data)
    rows, failure = _read_rows(text, FOLD_COLUMNS)
    if failure is not None:
        failure.diagnostics = diagnostics + failure.diagnostics
        return failure
    assignments: dict[str, int] = {}
    for line, row in rows:
        if not row:
            continue
        if len(row) != len(FOLD_COLUMNS):
            diagnostics.append(Diagnostic("wrong_column_count", f"expected {len(FOLD_COLUMNS)} fields, got {len(row)}", line))
            continue
        ann_id = row[0].strip()
        try:
            fold = int(row[1])
        except ValueError:
            diagnostics.append(Diagnostic("bad_row", f"fold is not an integer: {row[1]!r}", line))
            continue
        if ann_id in assignments:
            diagnostics.append(Diagnostic("duplicate_annotation_id", f"{ann_id!r} assigned twice", line))
            continue
        assignments[ann_id] = fold
    k = max(assignments.values()) + 1 if assignments else 0
    split = FoldSplit(k=max(k, 2), assignments=assignments) if assignments else None
    return ParseResult([split] if split else [], diagnostics)


# ---------------------------------------------------------------------------
# AnnotationRecord <-> JSON (store log lines and service payloads)


def record_to_json(record: AnnotationRecord) -> dict:
    doc: dict = {
        "annotation_id": record.annotation_id,
        "video_id": record.video_id,
        "class": str(record.action),
        "annotator_id": record.annotator_id,
        "schema": record.schema.value,
        "instance_key": record.instance_key,
    }
    if record.interval is not None:
        doc["interval"] = {"start": record.interval.start, "end": record.interval.end}
    if record.rb is not None:
        doc["rb"] = {
            "pre_actional": {"start": record.rb.pre_actional.start, "end": record.rb.pre_actional.end},
            "actional": {"start": record.rb.actional.start, "end": record.rb.actional.end},
        }
    return doc


def _interval_from_json(doc, what: str) -> TimeInterval:
    if not isinstance(doc, dict) or "start" not in doc or "end" not in doc:
        raise ValueError(f"{what} must be an object with start and end")
    return TimeInterval(float(doc["start"]), float(doc["end"]))


def record_from_json(doc: dict) -> AnnotationRecord:
    """Inverse of record_to_json; raises ValueError on any malformed payload."""
    if not isinstance(doc, dict):
        raise ValueError("record payload must be a JSON object")
    try:
        schema = _parse_schema(str(doc["schema"]))
        interval = None
        rb = None
        if schema is Schema.CONVENTIONAL:
            interval = _interval_from_json(doc.get("interval"), "interval")
        else:
            rb_doc = doc.get("rb")
            if not isinstance(rb_doc, dict):
                raise ValueError("rubicon record must carry an rb object")
            rb = RBAnnotation(
                pre_actional=_interval_from_json(rb_doc.get("pre_actional"), "rb.pre_actional"),
                actional=_interval_from_json(rb_doc.get("actional"), "rb.actional"),
            )
        return AnnotationRecord(
            annotation_id=str(doc["annotation_id"]),
            video_id=str(doc["video_id"]),
            action=ActionClass.parse(str(doc["class"])),
            annotator_id=str(doc["annotator_id"]),
            schema=schema,
            instance_key=str(doc["instance_key"]),
            interval=interval,
            rb=rb,
        )
    except KeyError as exc:
        raise ValueError(f"record payload missing field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ValueError(f"malformed record payload: {exc}") from None


# ---------------------------------------------------------------------------
# Project configuration


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FoldSettings:
    k: int = 5
    seed: int = 0
    stratified: bool = True

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError(f"folds.k must be >= 2, got {self.k}")


@dataclass(frozen=True)
class AugmentSettings:
    factor: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.factor < 1:
            raise ConfigError(f"augmentation.factor must be >= 1, got {self.factor}")


@dataclass(frozen=True)
class ControlQuestion:
    prompt: str
    choices: tuple[str, ...]
    correct_index: int

    def __post_init__(self) -> None:
        if len(self.choices) < 2:
            raise ConfigError("control question needs at least 2 choices")
        if not 0 <= self.correct_index < len(self.choices):
            raise ConfigError(f"correct_index {self.correct_index} out of range for {len(self.choices)} choices")


@dataclass(frozen=True)
class ProjectConfig:
    perturbation: PerturbationConfig = PerturbationConfig()
    folds: FoldSettings = FoldSettings()
    augmentation: AugmentSettings = AugmentSettings()
    control_questions: tuple[ControlQuestion, ...] = ()
    gate_max_retries: int = 2

    def with_seed(self, seed: int) -> "ProjectConfig":
        """Override every seed in the config (the CLI --seed switch)."""
        return replace(
            self,
            folds=replace(self.folds, seed=seed),
            augmentation=replace(self.augmentation, seed=seed),
        )


def load_config(data: bytes) -> ProjectConfig:
    """Parse a ProjectConfig JSON document, applying defaults per section."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    def section(name: str) -> dict:
        value = doc.get(name, {})
        if not isinstance(value, dict):
            raise ConfigError(f"config section {name!r} must be an object")
        return value

    try:
        pert = section("perturbation")
        perturbation = PerturbationConfig(
            delta_cap=float(pert.get("delta_cap", 2.0)),
            step=float(pert.get("step", 0.5)),
            min_iou=float(pert.get("min_iou", 0.5)),
            include_gt_pair=bool(pert.get("include_gt_pair", False)),
            clip_to_video=bool(pert.get("clip_to_video", True)),
        )
        folds_doc = section("folds")
        folds = FoldSettings(
            k=int(folds_doc.get("k", 5)),
            seed=int(folds_doc.get("seed", 0)),
            stratified=bool(folds_doc.get("stratified", True)),
        )
        aug_doc = section("augmentation")
        augmentation = AugmentSettings(factor=float(aug_doc.get("factor", 2.0)), seed=int(aug_doc.get("seed", 0)))
        questions = []
        raw_questions = doc.get("control_questions", [])
        if not isinstance(raw_questions, list):
            raise ConfigError("control_questions must be a list")
        for q in raw_questions:
            questions.append(
                ControlQuestion(
                    prompt=str(q["prompt"]),
                    choices=tuple(str(c) for c in q["choices"]),
                    correct_index=int(q["correct_index"]),
                )
            )
        gate_max_retries = int(doc.get("gate_max_retries", 2))
        if gate_max_retries < 0:
            raise ConfigError(f"gate_max_retries must be >= 0, got {gate_max_retries}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from None
    return ProjectConfig(perturbation, folds, augmentation, tuple(questions), gate_max_retries)


def dump_config(config: ProjectConfig) -> bytes:
    doc = {
        "perturbation": {
            "delta_cap": config.perturbation.delta_cap,
            "step": config.perturbation.step,
            "min_iou": config.perturbation.min_iou,
            "include_gt_pair": config.perturbation.include_gt_pair,
            "clip_to_video": config.perturbation.clip_to_video,
        },
        "folds": {"k": config.folds.k, "seed": config.folds.seed, "stratified": config.folds.stratified},
        "augmentation": {"factor": config.augmentation.factor, "seed": config.augmentation.seed},
        "control_questions": [
            {"prompt": q.prompt, "choices": list(q.choices), "correct_index": q.correct_index}
            for q in config.control_questions
        ],
        "gate_max_retries": config.gate_max_retries,
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")
