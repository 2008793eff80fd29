"""Axis-aligned box arithmetic and start/stop zone classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class Direction(str, enum.Enum):
    """Apparent horizontal motion of objects across the image."""

    RIGHT_TO_LEFT = "rtl"
    LEFT_TO_RIGHT = "ltr"


class Zone(str, enum.Enum):
    START = "start"
    STOP = "stop"
    MIDDLE = "middle"


@dataclass(frozen=True)
class BoundingBox:
    """Pixel rectangle ``[x_min, x_max) x [y_min, y_max)`` with positive area."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box coordinates: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box: {coords}")

    @classmethod
    def from_list(cls, coords: Sequence[float]) -> "BoundingBox":
        if len(coords) != 4:
            raise ValueError(f"box needs 4 coordinates, got {len(coords)}")
        return cls(*(float(c) for c in coords))

    def to_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def translate(self, dx: float, dy: float = 0.0) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def clip(self, width: float, height: float) -> "BoundingBox | None":
        """Clip to the image; ``None`` when nothing of the box is visible."""
        x0, y0 = max(self.x_min, 0.0), max(self.y_min, 0.0)
        x1, y1 = min(self.x_max, float(width)), min(self.y_max, float(height))
        if x0 >= x1 or y0 >= y1:
            return None
        return BoundingBox(x0, y0, x1, y1)


@dataclass(frozen=True)
class ImageGeometry:
    """Image size, motion direction and the start/stop zone widths (fractions of width)."""

    width: float
    height: float
    direction: Direction = Direction.RIGHT_TO_LEFT
    z_start: float = 0.2
    z_stop: float = 0.15

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image width and height must be positive")
        object.__setattr__(self, "direction", Direction(self.direction))
        for name in ("z_start", "z_stop"):
            z = getattr(self, name)
            if not 0.0 <= z < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {z}")
        if self.z_start + self.z_stop >= 1.0:
            raise ValueError("start and stop zones overlap (z_start + z_stop >= 1)")


def area(b: BoundingBox) -> float:
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    if a == b:
        return 1.0
    inter = intersection_area(a, b)
    aa, ab = area(a), area(b)
    # rounding may push the union below either area; that would let IoU exceed the boundary measure
    return inter / max(aa + ab - inter, aa, ab)


def boundary_measure(track_box: BoundingBox, det_box: BoundingBox) -> float:
    """Fraction of the detection's area that lies inside the track box.

    Unlike IoU this is not symmetric: a small detection fully inside a
    large track scores 1.0 even though their IoU is small.
    """
    return intersection_area(track_box, det_box) / area(det_box)


def zone_of(b: BoundingBox, g: ImageGeometry) -> Zone:
    """Classify a box by its horizontal center (clamped to the image)."""
    cx = min(max((b.x_min + b.x_max) / 2.0, 0.0), float(g.width))
    if g.direction is Direction.RIGHT_TO_LEFT:
        in_start = g.z_start > 0 and cx >= g.width * (1.0 - g.z_start)
        in_stop = g.z_stop > 0 and cx <= g.width * g.z_stop
    else:
        in_start = g.z_start > 0 and cx <= g.width * g.z_start
        in_stop = g.z_stop > 0 and cx >= g.width * (1.0 - g.z_stop)
    if in_start:
        return Zone.START
    if in_stop:
        return Zone.STOP
    return Zone.MIDDLE


def boxes_to_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    """Stack boxes into an ``(n, 4)`` float array of ``x_min, y_min, x_max, y_max``."""
    if not boxes:
        return np.zeros((0, 4))
    return np.array([(b.x_min, b.y_min, b.x_max, b.y_max) for b in boxes], dtype=float)


def _pairwise_intersection(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    h = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    return np.clip(w, 0.0, None) * np.clip(h, 0.0, None)


def _areas(a: np.ndarray) -> np.ndarray:
    return (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between rows of two ``(n, 4)`` / ``(m, 4)`` box arrays."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    inter = _pairwise_intersection(a, b)
    aa, ab = _areas(a)[:, None], _areas(b)[None, :]
    union = np.maximum(np.maximum(aa + ab - inter, aa), ab)
    out = inter / union
    # bit-identical boxes must score exactly 1
    same = np.all(a[:, None, :] == b[None, :, :], axis=2)
    out[same] = 1.0
    return out


def boundary_matrix(tracks: np.ndarray, dets: np.ndarray) -> np.ndarray:
    """Pairwise boundary measure; rows are tracks, columns detections."""
    tracks = np.asarray(tracks, dtype=float).reshape(-1, 4)
    dets = np.asarray(dets, dtype=float).reshape(-1, 4)
    return _pairwise_intersection(tracks, dets) / _areas(dets)[None, :]
