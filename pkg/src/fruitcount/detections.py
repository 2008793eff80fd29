"""Detection stream data model and the JSON Lines reader/writer.

One frame object per line::

    {"frame": 0, "detections": [{"box": [x0, y0, x1, y1], "fg": 0.9,
                                 "quality": {"green": 0.7, "mixed": 0.2, "red": 0.1}}]}

A detection may instead carry MultiClass scores,
``"classes": {"bg": ..., "green": ..., ...}``, which are converted on load.
An optional first line ``{"meta": {"width": W, "height": H, "labels": [...]}}``
carries image geometry and the quality label set.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator, Mapping, Sequence

from .geometry import BoundingBox

DEFAULT_LABELS: tuple[str, ...] = ("green", "mixed", "red")
BACKGROUND = "bg"


class StreamError(ValueError):
    """Raised for unreadable or invalid stream records; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class StreamParseError(StreamError):
    pass


class StreamSchemaError(StreamError):
    pass


class StreamOrderError(StreamError):
    pass


def check_labels(labels: Iterable[str]) -> tuple[str, ...]:
    labels = tuple(labels)
    if not labels:
        raise ValueError("label set must not be empty")
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate quality labels: {labels}")
    if BACKGROUND in labels:
        raise ValueError(f"{BACKGROUND!r} is reserved for the background class")
    return labels


def argmax_label(scores: Mapping[str, float], labels: Sequence[str]) -> str:
    """Label with the highest score; ties go to the earlier label."""
    best = labels[0]
    for lab in labels[1:]:
        if scores[lab] > scores[best]:
            best = lab
    return best


@dataclass(frozen=True)
class Detection:
    bbox: BoundingBox
    fg_score: float
    quality_scores: Mapping[str, float]

    def __post_init__(self):
        if not math.isfinite(self.fg_score):
            raise ValueError(f"non-finite foreground score {self.fg_score}")

    def quality(self, labels: Sequence[str]) -> str:
        return argmax_label(self.quality_scores, labels)


@dataclass(frozen=True)
class MultiClassDetection:
    """Single-head detector output: one score per quality class plus background."""

    bbox: BoundingBox
    class_scores: Mapping[str, float]


@dataclass(frozen=True)
class FrameDetections:
    frame_index: int
    detections: tuple[Detection, ...] = ()

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"negative frame index {self.frame_index}")
        object.__setattr__(self, "detections", tuple(self.detections))


@dataclass(frozen=True)
class DetectionStream:
    """Ordered frames plus the label set and (optional) image size."""

    frames: tuple[FrameDetections, ...] = ()
    labels: tuple[str, ...] = DEFAULT_LABELS
    width: float | None = None
    height: float | None = None
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "labels", check_labels(self.labels))
        prev = -1
        for fr in self.frames:
            if fr.frame_index <= prev:
                raise StreamOrderError(
                    f"frame index {fr.frame_index} does not follow {prev}")
            prev = fr.frame_index
            for d in fr.detections:
                if set(d.quality_scores) != set(self.labels):
                    raise StreamSchemaError(
                        f"frame {fr.frame_index}: quality keys {sorted(d.quality_scores)} "
                        f"do not match labels {list(self.labels)}")

    def __iter__(self) -> Iterator[FrameDetections]:
        return iter(self.frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def n_detections(self) -> int:
        return sum(len(f.detections) for f in self.frames)


def from_multiclass(d: MultiClassDetection, labels: Sequence[str] = DEFAULT_LABELS) -> Detection:
    """Convert N+1 class scores to a foreground score plus N quality scores.

    The foreground score is the maximum positive-class score, so the
    quality argmax and per-class ordering carry over unchanged.
    """
    labels = tuple(labels)
    expected = set(labels) | {BACKGROUND}
    if set(d.class_scores) != expected:
        raise ValueError(
            f"class scores {sorted(d.class_scores)} do not match {sorted(expected)}")
    quality = {lab: float(d.class_scores[lab]) for lab in labels}
    return Detection(d.bbox, max(quality.values()), quality)


def filter_by_score(frames, threshold: float):
    """Keep detections with ``fg_score >= threshold``; empty frames are retained."""
    kept = [
        FrameDetections(f.frame_index, tuple(d for d in f.detections if d.fg_score >= threshold))
        for f in frames
    ]
    if isinstance(frames, DetectionStream):
        return replace(frames, frames=tuple(kept))
    return kept


# ---------------------------------------------------------------- JSON Lines


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), False
    if isinstance(source, io.TextIOBase):
        return source, False
    if hasattr(source, "read"):
        return io.TextIOWrapper(source, encoding="utf-8"), False
    raise TypeError(f"cannot read a stream from {type(source).__name__}")


def iter_json_lines(source) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)`` for every non-blank line."""
    fh, owned = _open_text(source)
    try:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise StreamParseError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(obj, dict):
                raise StreamSchemaError("record must be a JSON object", lineno)
            yield lineno, obj
    finally:
        if owned:
            fh.close()


def parse_box(value, lineno: int | None) -> BoundingBox:
    if not isinstance(value, list) or len(value) != 4:
        raise StreamSchemaError("'box' must be a list of 4 numbers", lineno)
    try:
        return BoundingBox.from_list([_number(v, "box", lineno) for v in value])
    except ValueError as exc:
        if isinstance(exc, StreamError):
            raise
        raise StreamSchemaError(str(exc), lineno) from None


def _number(value, key: str, lineno: int | None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise StreamSchemaError(f"{key!r} must be a number, got {value!r}", lineno)
    value = float(value)
    if not math.isfinite(value):
        raise StreamSchemaError(f"{key!r} must be finite", lineno)
    return value


def _score_map(value, keys: Sequence[str], name: str, lineno: int) -> dict[str, float]:
    if not isinstance(value, dict):
        raise StreamSchemaError(f"{name!r} must be an object", lineno)
    missing = [k for k in keys if k not in value]
    if missing:
        raise StreamSchemaError(f"{name!r} is missing key(s) {missing}", lineno)
    extra = sorted(set(value) - set(keys))
    if extra:
        raise StreamSchemaError(f"{name!r} has unknown key(s) {extra}", lineno)
    return {k: _number(value[k], f"{name}.{k}", lineno) for k in keys}


def _parse_detection(obj, labels: Sequence[str], lineno: int) -> Detection:
    if not isinstance(obj, dict):
        raise StreamSchemaError("detection must be an object", lineno)
    if "box" not in obj:
        raise StreamSchemaError("detection is missing 'box'", lineno)
    box = parse_box(obj["box"], lineno)
    if "classes" in obj:
        if "fg" in obj or "quality" in obj:
            raise StreamSchemaError("detection mixes 'classes' with 'fg'/'quality'", lineno)
        scores = _score_map(obj["classes"], (BACKGROUND, *labels), "classes", lineno)
        return from_multiclass(MultiClassDetection(box, scores), labels)
    for key in ("fg", "quality"):
        if key not in obj:
            raise StreamSchemaError(f"detection is missing {key!r}", lineno)
    fg = _number(obj["fg"], "fg", lineno)
    return Detection(box, fg, _score_map(obj["quality"], labels, "quality", lineno))


def parse_frame_index(obj: dict, lineno: int) -> int:
    idx = obj.get("frame")
    if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
        raise StreamSchemaError("'frame' must be a non-negative integer", lineno)
    return idx


def parse_meta(obj: dict, lineno: int) -> dict:
    meta = obj["meta"]
    if not isinstance(meta, dict):
        raise StreamSchemaError("'meta' must be an object", lineno)
    for key in ("width", "height"):
        if key in meta and meta[key] is not None:
            if _number(meta[key], key, lineno) <= 0:
                raise StreamSchemaError(f"{key!r} must be positive", lineno)
    if "labels" in meta:
        labs = meta["labels"]
        if not isinstance(labs, list) or not all(isinstance(x, str) for x in labs):
            raise StreamSchemaError("'labels' must be a list of strings", lineno)
        try:
            check_labels(labs)
        except ValueError as exc:
            raise StreamSchemaError(str(exc), lineno) from None
    return meta


def parse_stream(source, labels: Sequence[str] | None = None) -> DetectionStream:
    """Read and validate a detection stream.

    Args:
        source: path, bytes, or a text/binary file object holding JSON Lines.
        labels: quality label set; overrides the header's ``labels`` when given.

    Raises:
        StreamParseError: a line is not valid JSON.
        StreamSchemaError: a record does not follow the schema.
        StreamOrderError: frame indices are not strictly increasing.
    """
    meta: dict = {}
    frames: list[FrameDetections] = []
    active = tuple(labels) if labels is not None else None
    prev = -1
    first = True
    for lineno, obj in iter_json_lines(source):
        if "meta" in obj:
            if not first:
                raise StreamSchemaError("'meta' header is only allowed on the first line", lineno)
            meta = parse_meta(obj, lineno)
            if active is None and "labels" in meta:
                active = tuple(meta["labels"])
            first = False
            continue
        first = False
        if active is None:
            active = DEFAULT_LABELS
        idx = parse_frame_index(obj, lineno)
        if idx <= prev:
            raise StreamOrderError(f"frame index {idx} does not follow {prev}", lineno)
        prev = idx
        dets = obj.get("detections", [])
        if not isinstance(dets, list):
            raise StreamSchemaError("'detections' must be a list", lineno)
        frames.append(FrameDetections(idx, tuple(_parse_detection(d, active, lineno) for d in dets)))
    return DetectionStream(
        frames=tuple(frames),
        labels=active if active is not None else DEFAULT_LABELS,
        width=float(meta["width"]) if meta.get("width") is not None else None,
        height=float(meta["height"]) if meta.get("height") is not None else None,
        meta=meta,
    )


def detection_to_dict(d: Detection, labels: Sequence[str]) -> dict:
    return {
        "box": d.bbox.to_list(),
        "fg": d.fg_score,
        "quality": {lab: d.quality_scores[lab] for lab in labels},
    }


def stream_header(stream: DetectionStream) -> dict | None:
    meta = dict(stream.meta)
    if stream.width is not None:
        meta["width"] = stream.width
    if stream.height is not None:
        meta["height"] = stream.height
    if meta or tuple(stream.labels) != DEFAULT_LABELS:
        meta["labels"] = list(stream.labels)
    return {"meta": meta} if meta else None


def write_stream(stream: DetectionStream, fp: IO[str]) -> None:
    header = stream_header(stream)
    if header is not None:
        fp.write(json.dumps(header) + "\n")
    for f in stream.frames:
        rec = {"frame": f.frame_index,
               "detections": [detection_to_dict(d, stream.labels) for d in f.detections]}
        fp.write(json.dumps(rec) + "\n")


def dumps_stream(stream: DetectionStream) -> str:
    buf = io.StringIO()
    write_stream(stream, buf)
    return buf.getvalue()
