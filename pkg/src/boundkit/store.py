"""Durable annotation persistence: an append-only newline-delimited JSON log
plus a periodically regenerated CSV snapshot.

Each accepted record is one JSON line written and fsynced in a single append.
A crash can only tear the final line, and a torn line can never look complete
(record JSON contains no newline), so recovery replays the longest valid
prefix and truncates the rest. Records are immutable once written; a record
re-using an annotation_id supersedes the earlier one.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from .core import AnnotationRecord
from .diagnostics import Diagnostic
from .io import record_from_json, record_to_json, serialize_annotations

LOG_NAME = "annotations.log"
SNAPSHOT_NAME = "snapshot.csv"


class AnnotationStore:
    def __init__(self, directory: str | Path, snapshot_every: int = 100):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.log_path = self.directory / LOG_NAME
        self.snapshot_path = self.directory / SNAPSHOT_NAME
        self.snapshot_every = snapshot_every
        self.recovery_diagnostics: list[Diagnostic] = []
        self._lock = threading.Lock()
        self._records: list[AnnotationRecord] = []
        self._appends_since_snapshot = 0
        self._recover()
        self._fd = os.open(self.log_path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)

    def _recover(self) -> None:
        if not self.log_path.exists():
            self.log_path.touch()
            return
        raw = self.log_path.read_bytes()
        valid_bytes = 0
        records: list[AnnotationRecord] = []
        while valid_bytes < len(raw):
            newline = raw.find(b"\n", valid_bytes)
            if newline == -1:
                self.recovery_diagnostics.append(
                    Diagnostic("torn_record", f"dropped {len(raw) - valid_bytes} trailing bytes without newline")
                )
                break
            line = raw[valid_bytes:newline]
            if line:
                try:
                    records.append(record_from_json(json.loads(line.decode("utf-8"))))
                except (ValueError, UnicodeDecodeError) as exc:
                    self.recovery_diagnostics.append(
                        Diagnostic("torn_record", f"replay stopped at unreadable line: {exc}")
                    )
                    break
            valid_bytes = newline + 1
        if valid_bytes < len(raw):
            with open(self.log_path, "r+b") as fh:
                fh.truncate(valid_bytes)
                fh.flush()
                os.fsync(fh.fileno())
        self._records = records

    def _append_bytes(self, data: bytes) -> None:
        # Seam for fault-injection tests; one write + fsync per record.
        os.write(self._fd, data)
        os.fsync(self._fd)

    def append(self, record: AnnotationRecord) -> None:
        line = json.dumps(record_to_json(record), sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"
        with self._lock:
            self._append_bytes(line)
            self._records.append(record)
            self._appends_since_snapshot += 1
            if self._appends_since_snapshot >= self.snapshot_every:
                self._write_snapshot_locked()

    def records(self) -> list[AnnotationRecord]:
        """Current view: latest record per annotation_id, in first-write order."""
        with self._lock:
            return self._current_view()

    def all_log_records(self) -> list[AnnotationRecord]:
        with self._lock:
            return list(self._records)

    def _current_view(self) -> list[AnnotationRecord]:
        latest: dict[str, AnnotationRecord] = {}
        order: list[str] = []
        for rec in self._records:
            if rec.annotation_id not in latest:
                order.append(rec.annotation_id)
            latest[rec.annotation_id] = rec
        return [latest[ann_id] for ann_id in order]

    def _write_snapshot_locked(self) -> None:
        data = serialize_annotations(self._current_view())
        tmp = self.snapshot_path.with_suffix(".csv.tmp")
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.snapshot_path)
        self._appends_since_snapshot = 0

    def write_snapshot(self) -> None:
        with self._lock:
            self._write_snapshot_locked()

    def close(self) -> None:
        with self._lock:
            if self._fd >= 0:
                os.close(self._fd)
                self._fd = -1

    def __enter__(self) -> "AnnotationStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
