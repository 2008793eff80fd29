"""Fruit counting and quality estimation by tracking-via-detection."""

from .detections import (
    DEFAULT_LABELS,
    Detection,
    DetectionStream,
    FrameDetections,
    MultiClassDetection,
    filter_by_score,
    from_multiclass,
    parse_stream,
)
from .estimator import TrackCounter
from .geometry import BoundingBox, Direction, ImageGeometry, Zone, boundary_measure, iou, zone_of
from .tracker import CountReport, FrameUpdate, Tracker, TrackerConfig, run_tracker

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_LABELS",
    "BoundingBox",
    "CountReport",
    "Detection",
    "DetectionStream",
    "Direction",
    "FrameDetections",
    "FrameUpdate",
    "ImageGeometry",
    "MultiClassDetection",
    "TrackCounter",
    "Tracker",
    "TrackerConfig",
    "Zone",
    "boundary_measure",
    "filter_by_score",
    "from_multiclass",
    "iou",
    "parse_stream",
    "run_tracker",
    "zone_of",
]
