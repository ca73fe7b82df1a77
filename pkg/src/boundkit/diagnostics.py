"""Diagnostic records shared by parsers, analyzers and the service."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Severity(enum.Enum):
    WARNING = "warning"
    FATAL = "fatal"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int | None = None
    severity: Severity = Severity.WARNING

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"[{self.severity.value}] {where}{self.code}: {self.message}"
