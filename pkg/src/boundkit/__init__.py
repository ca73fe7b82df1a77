"""boundkit: temporal-bound annotation toolkit.

Creating, validating and analyzing temporal-bound annotations of object
interactions in untrimmed video, and measuring how sensitive recognition
accuracy is to perturbations of those bounds.
"""

from .core import (
    SECONDS_TOL,
    ActionClass,
    AnnotationRecord,
    RBAnnotation,
    Schema,
    TimeInterval,
    VideoMeta,
    frame_to_time,
    iou,
    shifts,
    time_to_frame,
)
from .diagnostics import Diagnostic, Severity
from .perturb import DescriptorBins, GeneratedSegment, PerturbationConfig, candidate_ends, candidate_starts, descriptor_bins, generate

__version__ = "0.1.0"

__all__ = [
    "SECONDS_TOL",
    "ActionClass",
    "AnnotationRecord",
    "Diagnostic",
    "DescriptorBins",
    "GeneratedSegment",
    "PerturbationConfig",
    "RBAnnotation",
    "Schema",
    "Severity",
    "TimeInterval",
    "VideoMeta",
    "candidate_ends",
    "candidate_starts",
    "descriptor_bins",
    "frame_to_time",
    "generate",
    "iou",
    "shifts",
    "time_to_frame",
    "__version__",
]
