"""Local HTTP service hosting annotation sessions: task assignment,
control-question gating for Rubicon sessions, validated submission with
durable append-only persistence, and live consistency feedback.

All write paths funnel through the store's serialized appender; responses for
consistency feedback are computed with the same library code the offline CLI
uses, so the two always agree bit for bit.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI
from fastapi.responses import FileResponse, JSONResponse, Response

from .consistency import SchemeSelector, pairwise_iou, select_interval
from .consistency import ConsistencyStats
from .core import SECONDS_TOL, AnnotationRecord, Schema, VideoMeta
from .diagnostics import Diagnostic
from .io import (
    AnnotationTask,
    ProjectConfig,
    load_config,
    parse_tasks,
    parse_videos,
    record_from_json,
    serialize_annotations,
)
from .store import AnnotationStore

CONFIG_NAME = "config.json"
VIDEOS_CSV = "videos.csv"
TASKS_CSV = "tasks.csv"
VIDEO_DIR = "videos"
STORE_DIR = "store"


@dataclass
class Session:
    session_id: str
    annotator_id: str
    schema: Schema
    passed_gate: bool
    assigned_tasks: list[AnnotationTask]
    gate_failures: int = 0

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "annotator_id": self.annotator_id,
            "schema": self.schema.value,
            "passed_gate": self.passed_gate,
            "assigned_tasks": [
                {"video_id": t.video_id, "instance_key": t.instance_key, "class": str(t.action)}
                for t in self.assigned_tasks
            ],
        }


@dataclass
class Project:
    """Everything the service needs, loaded from a project directory."""

    root: Path
    config: ProjectConfig
    videos: dict[str, VideoMeta]
    tasks: list[AnnotationTask]
    store: AnnotationStore

    @classmethod
    def open(cls, root: str | Path) -> "Project":
        root = Path(root)
        config_path = root / CONFIG_NAME
        config = load_config(config_path.read_bytes()) if config_path.exists() else ProjectConfig()
        videos: dict[str, VideoMeta] = {}
        videos_path = root / VIDEOS_CSV
        if videos_path.exists():
            for meta in parse_videos(videos_path.read_bytes()).records:
                videos[meta.video_id] = meta
        tasks: list[AnnotationTask] = []
        tasks_path = root / TASKS_CSV
        if tasks_path.exists():
            tasks = parse_tasks(tasks_path.read_bytes()).records
        store = AnnotationStore(root / STORE_DIR)
        return cls(root=root, config=config, videos=videos, tasks=tasks, store=store)


@dataclass
class ServiceState:
    project: Project
    sessions: dict[str, Session] = field(default_factory=dict)
    _session_counter: itertools.count = field(default_factory=lambda: itertools.count(1))
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def new_session(self, annotator_id: str, schema: Schema) -> Session:
        with self._lock:
            session = Session(
                session_id=f"session-{next(self._session_counter)}",
                annotator_id=annotator_id,
                schema=schema,
                # Conventional sessions are gate-exempt; a Rubicon project
                # with no configured questions has nothing to gate on.
                passed_gate=schema is Schema.CONVENTIONAL or not self.project.config.control_questions,
                assigned_tasks=list(self.project.tasks),
            )
            self.sessions[session.session_id] = session
            return session


def _reject(status: int, reasons: list[Diagnostic]) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"accepted": False, "reasons": [{"code": d.code, "message": d.message} for d in reasons]},
    )


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def validate_submission(record: AnnotationRecord, videos: dict[str, VideoMeta]) -> list[Diagnostic]:
    """Submission-time checks beyond what record construction enforces."""
    reasons: list[Diagnostic] = []
    meta = videos.get(record.video_id)
    if meta is not None and record.span().end > meta.duration + SECONDS_TOL:
        reasons.append(
            Diagnostic(
                "out_of_bounds",
                f"interval ends at {record.span().end} s but video {record.video_id} lasts {meta.duration} s",
            )
        )
    return reasons


def instance_feedback(
    records: list[AnnotationRecord], instance_key: str, selector: SchemeSelector
) -> dict:
    intervals = [
        interval
        for rec in records
        if rec.instance_key == instance_key and (interval := select_interval(rec, selector)) is not None
    ]
    if len(intervals) < 2:
        return {"n_annotators": len(intervals), "pair_ious": [], "mean": None, "quartiles": None}
    pairs = pairwise_iou(intervals)
    stats = ConsistencyStats.from_pairs(pairs, selector, instance_key=instance_key)
    return {
        "n_annotators": len(intervals),
        "pair_ious": list(stats.pair_ious),
        "mean": stats.mean,
        "quartiles": list(stats.quartiles),
    }


def create_app(project_root: str | Path) -> FastAPI:
    state = ServiceState(project=Project.open(project_root))
    app = FastAPI(title="boundkit annotation service")
    app.state.service = state
    project = state.project

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)):
        annotator_id = str(payload.get("annotator_id", "")).strip()
        if not annotator_id:
            return _reject(422, [Diagnostic("bad_request", "annotator_id must be non-empty")])
        try:
            schema = Schema(str(payload.get("schema", "")).strip().lower())
        except ValueError:
            return _reject(422, [Diagnostic("bad_request", "schema must be conventional or rubicon")])
        session = state.new_session(annotator_id, schema)
        doc = session.to_json()
        if schema is Schema.RUBICON:
            # prompts and choices only; the correct answers never leave the server
            doc["control_questions"] = [
                {"prompt": q.prompt, "choices": list(q.choices)} for q in project.config.control_questions
            ]
        return doc

    @app.post("/sessions/{session_id}/gate")
    def answer_gate(session_id: str, payload: dict = Body(...)):
        session = state.sessions.get(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        if session.schema is not Schema.RUBICON:
            return _reject(422, [Diagnostic("gate_not_applicable", "conventional sessions have no gate")])
        if session.passed_gate:
            return {"passed": True, "retry_allowed": True, "attempts": session.gate_failures}
        questions = project.config.control_questions
        answers = payload.get("answers")
        if not isinstance(answers, list) or len(answers) != len(questions):
            return _reject(422, [Diagnostic("bad_answers", f"expected {len(questions)} answers")])
        if session.gate_failures > project.config.gate_max_retries:
            return {"passed": False, "retry_allowed": False, "attempts": session.gate_failures}
        correct = all(
            isinstance(a, int) and a == q.correct_index for a, q in zip(answers, questions)
        )
        if correct:
            session.passed_gate = True
            return {"passed": True, "retry_allowed": True, "attempts": session.gate_failures}
        session.gate_failures += 1
        retry_allowed = session.gate_failures <= project.config.gate_max_retries
        return {"passed": False, "retry_allowed": retry_allowed, "attempts": session.gate_failures}

    @app.get("/tasks")
    def list_tasks(session: str):
        sess = state.sessions.get(session)
        if sess is None:
            return _error(404, "unknown_session", f"no session {session!r}")
        return {
            "tasks": [
                {"video_id": t.video_id, "instance_key": t.instance_key, "class": str(t.action)}
                for t in sess.assigned_tasks
            ]
        }

    @app.post("/annotations")
    def submit_annotation(payload: dict = Body(...)):
        session = state.sessions.get(str(payload.get("session_id", "")))
        if session is None:
            return _error(404, "unknown_session", "session_id missing or unknown")
        body = dict(payload)
        body.pop("session_id", None)
        body.setdefault("annotator_id", session.annotator_id)
        try:
            record = record_from_json(body)
        except ValueError as exc:
            code = "rb_adjacency" if "RB adjacency" in str(exc) else "bad_record"
            return _reject(422, [Diagnostic(code, str(exc))])
        if record.schema is not session.schema:
            return _reject(
                422,
                [Diagnostic("schema_mismatch", f"session is {session.schema.value}, record is {record.schema.value}")],
            )
        if not session.passed_gate:
            return _reject(403, [Diagnostic("gate_not_passed", "answer the control questions before annotating")])
        reasons = validate_submission(record, project.videos)
        if reasons:
            return _reject(422, reasons)
        project.store.append(record)
        return {"accepted": True, "annotation_id": record.annotation_id}

    @app.get("/instances/{instance_key}/consistency")
    def consistency(instance_key: str, scheme: str = "conventional"):
        try:
            selector = SchemeSelector(scheme.strip().lower())
        except ValueError:
            return _error(422, "bad_scheme", f"unknown scheme {scheme!r}")
        records = project.store.records()
        known_keys = {rec.instance_key for rec in records} | {t.instance_key for t in project.tasks}
        if instance_key not in known_keys:
            return _error(404, "unknown_instance", f"no instance {instance_key!r}")
        return instance_feedback(records, instance_key, selector)

    @app.get("/export")
    def export():
        return Response(content=serialize_annotations(project.store.records()), media_type="text/csv")

    @app.get("/videos/{video_id}/meta")
    def video_meta(video_id: str):
        meta = project.videos.get(video_id)
        if meta is None:
            return _error(404, "unknown_video", f"no metadata for video {video_id!r}")
        return {"video_id": meta.video_id, "duration": meta.duration, "frame_rate": meta.frame_rate}

    @app.get("/videos/{video_id}")
    def video_bytes(video_id: str):
        video_dir = project.root / VIDEO_DIR
        exact = video_dir / video_id
        if exact.is_file():
            return FileResponse(exact)
        matches = sorted(video_dir.glob(f"{video_id}.*")) if video_dir.is_dir() else []
        if matches:
            return FileResponse(matches[0])
        return _error(404, "unknown_video", f"no file for video {video_id!r}")

    return app
