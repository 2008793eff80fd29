"""Two-stage tracking-via-detection counter.

Each frame after the first is processed as:

1. greedy association: repeatedly bind the globally best (track, detection)
   pair by IoU while it exceeds ``gamma_dt``;
2. spawning: every leftover detection starts a new track unless it sits in
   the start/stop zone, overlaps an active track by IoU >= ``gamma_merge``,
   or is contained in one by boundary measure >= ``gamma_bndry``.

Tracks unmatched for ``max_misses`` consecutive frames, or whose box
reaches the stop zone, are retired. A retired track's quality is the
most frequent per-frame quality vote.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assignment import greedy_pairs
from .detections import DEFAULT_LABELS, Detection, FrameDetections, check_labels
from .geometry import (
    BoundingBox,
    ImageGeometry,
    Zone,
    boundary_matrix,
    boxes_to_array,
    iou_matrix,
    zone_of,
)


class TrackerStateError(RuntimeError):
    """Tracker driven out of order (double init, stale frame, step after finalize)."""


class TrackState(str, enum.Enum):
    ACTIVE = "active"
    RETIRED = "retired"


class SuppressReason(str, enum.Enum):
    START_ZONE = "start_zone"
    STOP_ZONE = "stop_zone"
    MERGE_IOU = "merge_iou"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker thresholds.

    Gate thresholds above 1 can never be reached and so switch that gate
    off (e.g. ``gamma_bndry=1.01`` disables the boundary gate).
    """

    geometry: ImageGeometry
    gamma_dt: float = 0.3
    gamma_merge: float = 0.4
    gamma_bndry: float = 0.5
    max_misses: int = 3
    min_track_detections: int = 1
    init_frame_zone_filter: bool = False

    def __post_init__(self):
        for name in ("gamma_dt", "gamma_merge", "gamma_bndry"):
            g = getattr(self, name)
            if not (math.isfinite(g) and g >= 0):
                raise ValueError(f"{name} must be a finite non-negative number, got {g}")
        if int(self.max_misses) != self.max_misses or self.max_misses < 1:
            raise ValueError(f"max_misses must be a positive integer, got {self.max_misses}")
        if int(self.min_track_detections) != self.min_track_detections or self.min_track_detections < 1:
            raise ValueError("min_track_detections must be a positive integer")


@dataclass
class Track:
    id: int
    current_box: BoundingBox
    init_frame: int
    last_seen_frame: int
    state: TrackState = TrackState.ACTIVE
    miss_count: int = 0
    quality_votes: dict[str, int] = field(default_factory=dict)
    quality_score_sums: dict[str, float] = field(default_factory=dict)
    fg_history: list[float] = field(default_factory=list)
    per_frame_detected: list[bool] = field(default_factory=list)
    detection_count: int = 0
    retire_reason: str | None = None

    @property
    def active(self) -> bool:
        return self.state is TrackState.ACTIVE

    def observe(self, det: Detection, frame_index: int, labels: Sequence[str]) -> None:
        self.current_box = det.bbox
        self.last_seen_frame = frame_index
        self.miss_count = 0
        q = det.quality(labels)
        self.quality_votes[q] = self.quality_votes.get(q, 0) + 1
        for lab in labels:
            self.quality_score_sums[lab] = self.quality_score_sums.get(lab, 0.0) + det.quality_scores[lab]
        self.fg_history.append(det.fg_score)
        self.per_frame_detected.append(True)
        self.detection_count += 1

    def retire(self, reason: str) -> None:
        self.state = TrackState.RETIRED
        self.retire_reason = reason


def track_quality(t: Track, labels: Sequence[str] = DEFAULT_LABELS) -> str:
    """Most frequent quality vote.

    Ties go to the label with the highest summed quality score over the
    track's detections, then to the earlier label.
    """
    if not t.quality_votes:
        raise ValueError(f"track {t.id} has no quality votes")
    best = None
    best_key = None
    for lab in labels:
        key = (t.quality_votes.get(lab, 0), t.quality_score_sums.get(lab, 0.0))
        if best_key is None or key > best_key:
            best, best_key = lab, key
    return best


@dataclass(frozen=True)
class FrameUpdate:
    """Audit record of what happened to every detection and track in one frame."""

    frame_index: int
    matched: tuple[tuple[int, int], ...] = ()
    spawned: tuple[tuple[int, int], ...] = ()
    retired_by_miss: tuple[int, ...] = ()
    retired_by_stop_zone: tuple[int, ...] = ()
    suppressed_detections: tuple[tuple[int, SuppressReason], ...] = ()

    @property
    def spawned_ids(self) -> tuple[int, ...]:
        return tuple(tid for tid, _ in self.spawned)

    def to_dict(self) -> dict:
        return {
            "frame": self.frame_index,
            "matched": [list(p) for p in self.matched],
            "spawned": [{"track": tid, "detection": di} for tid, di in self.spawned],
            "retired_by_miss": list(self.retired_by_miss),
            "retired_by_stop_zone": list(self.retired_by_stop_zone),
            "suppressed": [{"detection": di, "reason": r.value} for di, r in self.suppressed_detections],
        }


@dataclass(frozen=True)
class TrackRecord:
    id: int
    quality: str
    init_frame: int
    last_seen_frame: int
    detection_count: int
    counted: bool

    @property
    def lifetime(self) -> int:
        return self.last_seen_frame - self.init_frame + 1


@dataclass(frozen=True)
class CountReport:
    counts: Mapping[str, int]
    tracks: tuple[TrackRecord, ...] = ()

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "total": self.total,
            "tracks": [
                {"id": r.id, "quality": r.quality, "init_frame": r.init_frame,
                 "last_seen_frame": r.last_seen_frame, "lifetime": r.lifetime,
                 "detection_count": r.detection_count, "counted": r.counted}
                for r in self.tracks
            ],
        }


class Tracker:
    """Single-stream tracking state machine.

    Feed frames in order with :meth:`update` (or :meth:`init_frame` then
    :meth:`step`), then call :meth:`finalize` for the count report.
    """

    def __init__(self, config: TrackerConfig, labels: Iterable[str] = DEFAULT_LABELS):
        self.config = config
        self.labels = check_labels(labels)
        self.tracks: list[Track] = []
        self.last_frame: int | None = None
        self._next_id = 0
        self._report: CountReport | None = None

    @property
    def initialized(self) -> bool:
        return self.last_frame is not None

    @property
    def active_tracks(self) -> list[Track]:
        return [t for t in self.tracks if t.active]

    def get_track(self, track_id: int) -> Track:
        return self.tracks[track_id]

    def _spawn(self, det: Detection, frame_index: int) -> Track:
        t = Track(id=self._next_id, current_box=det.bbox, init_frame=frame_index,
                  last_seen_frame=frame_index)
        t.observe(det, frame_index, self.labels)
        self._next_id += 1
        self.tracks.append(t)
        return t

    def _zone_gate(self, det: Detection) -> SuppressReason | None:
        z = zone_of(det.bbox, self.config.geometry)
        if z is Zone.START:
            return SuppressReason.START_ZONE
        if z is Zone.STOP:
            return SuppressReason.STOP_ZONE
        return None

    def _check_open(self, frame: FrameDetections) -> None:
        if self._report is not None:
            raise TrackerStateError("tracker already finalized")
        if self.last_frame is not None and frame.frame_index <= self.last_frame:
            raise TrackerStateError(
                f"frame {frame.frame_index} is not after frame {self.last_frame}")

    def init_frame(self, frame: FrameDetections) -> FrameUpdate:
        """Start one track per detection in the first frame."""
        if self.initialized:
            raise TrackerStateError("tracker already initialized")
        self._check_open(frame)
        spawned, suppressed = [], []
        for k, det in enumerate(frame.detections):
            reason = self._zone_gate(det) if self.config.init_frame_zone_filter else None
            if reason is not None:
                suppressed.append((k, reason))
                continue
            spawned.append((self._spawn(det, frame.frame_index).id, k))
        self.last_frame = frame.frame_index
        return FrameUpdate(frame.frame_index, spawned=tuple(spawned),
                           suppressed_detections=tuple(suppressed))

    def associate_stage1(self, frame: FrameDetections) -> FrameUpdate:
        """Bind detections to active tracks by greedy global-max IoU (> gamma_dt)."""
        if not self.initialized:
            raise TrackerStateError("tracker not initialized")
        active = self.active_tracks
        dets = frame.detections
        if not active or not dets:
            return FrameUpdate(frame.frame_index)
        ious = iou_matrix(boxes_to_array([t.current_box for t in active]),
                          boxes_to_array([d.bbox for d in dets]))
        matched = []
        for r, c in greedy_pairs(ious, self.config.gamma_dt):
            t = active[r]
            t.observe(dets[c], frame.frame_index, self.labels)
            matched.append((t.id, c))
        return FrameUpdate(frame.frame_index, matched=tuple(matched))

    def spawn_stage2(self, frame: FrameDetections, remaining: Sequence[int]) -> FrameUpdate:
        """Gate leftover detections and start tracks for the survivors.

        Detections are visited by descending foreground score. Tracks
        spawned earlier in the same frame take part in the overlap gates.
        """
        cfg = self.config
        dets = frame.detections
        order = sorted(remaining, key=lambda k: (-dets[k].fg_score, k))
        active_boxes = boxes_to_array([t.current_box for t in self.active_tracks])
        spawned, suppressed = [], []
        for k in order:
            det = dets[k]
            reason = self._zone_gate(det)
            if reason is None and len(active_boxes):
                box = boxes_to_array([det.bbox])
                if iou_matrix(active_boxes, box).max() >= cfg.gamma_merge:
                    reason = SuppressReason.MERGE_IOU
                elif boundary_matrix(active_boxes, box).max() >= cfg.gamma_bndry:
                    reason = SuppressReason.BOUNDARY
            if reason is not None:
                suppressed.append((k, reason))
                continue
            t = self._spawn(det, frame.frame_index)
            spawned.append((t.id, k))
            active_boxes = np.vstack([active_boxes, boxes_to_array([t.current_box])])
        suppressed.sort()
        return FrameUpdate(frame.frame_index, spawned=tuple(spawned),
                           suppressed_detections=tuple(suppressed))

    def step(self, frame: FrameDetections) -> FrameUpdate:
        """Process one frame after initialization."""
        if not self.initialized:
            raise TrackerStateError("tracker not initialized; call init_frame first")
        self._check_open(frame)
        s1 = self.associate_stage1(frame)
        used = {c for _, c in s1.matched}
        remaining = [k for k in range(len(frame.detections)) if k not in used]
        s2 = self.spawn_stage2(frame, remaining)

        seen = {tid for tid, _ in s1.matched} | set(s2.spawned_ids)
        by_miss, by_stop = [], []
        for t in self.active_tracks:
            if t.id in seen:
                continue
            t.miss_count += 1
            t.per_frame_detected.append(False)
            if t.miss_count >= self.config.max_misses:
                t.retire("misses")
                by_miss.append(t.id)
        for t in self.active_tracks:
            if zone_of(t.current_box, self.config.geometry) is Zone.STOP:
                t.retire("stop_zone")
                by_stop.append(t.id)

        self.last_frame = frame.frame_index
        return FrameUpdate(
            frame.frame_index,
            matched=s1.matched,
            spawned=s2.spawned,
            retired_by_miss=tuple(by_miss),
            retired_by_stop_zone=tuple(by_stop),
            suppressed_detections=s2.suppressed_detections,
        )

    def update(self, frame: FrameDetections) -> FrameUpdate:
        return self.step(frame) if self.initialized else self.init_frame(frame)

    def finalize(self) -> CountReport:
        """Retire remaining tracks and count them by quality."""
        if self._report is not None:
            return self._report
        for t in self.active_tracks:
            t.retire("end_of_stream")
        counts = {lab: 0 for lab in self.labels}
        records = []
        for t in self.tracks:
            q = track_quality(t, self.labels)
            counted = t.detection_count >= self.config.min_track_detections
            if counted:
                counts[q] += 1
            records.append(TrackRecord(t.id, q, t.init_frame, t.last_seen_frame,
                                       t.detection_count, counted))
        self._report = CountReport(counts, tuple(records))
        return self._report


def run_tracker(frames: Iterable[FrameDetections], config: TrackerConfig,
                labels: Iterable[str] = DEFAULT_LABELS) -> tuple[CountReport, list[FrameUpdate]]:
    """Feed a whole stream through a fresh tracker."""
    tracker = Tracker(config, labels)
    updates = [tracker.update(f) for f in frames]
    return tracker.finalize(), updates
