"""Detection and counting metrics.

Ground truth is JSON Lines, one frame per line::

    {"frame": 0, "objects": [{"box": [x0, y0, x1, y1], "quality": "red", "id": 7}]}

``id`` is optional; when present, distinct ids per quality give true counts.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .assignment import greedy_pairs
from .detections import (
    DEFAULT_LABELS,
    Detection,
    DetectionStream,
    StreamOrderError,
    StreamSchemaError,
    check_labels,
    iter_json_lines,
    parse_box,
    parse_frame_index,
    parse_meta,
)
from .geometry import BoundingBox, boxes_to_array, iou_matrix
from .tracker import CountReport


@dataclass(frozen=True)
class Annotation:
    bbox: BoundingBox
    quality: str
    object_id: int | None = None


@dataclass(frozen=True)
class GroundTruthFrame:
    frame_index: int
    annotations: tuple[Annotation, ...] = ()


@dataclass(frozen=True)
class GroundTruthStream:
    frames: tuple[GroundTruthFrame, ...] = ()
    labels: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        seen = set()
        for f in self.frames:
            if f.frame_index in seen:
                raise StreamOrderError(f"duplicate ground-truth frame {f.frame_index}")
            seen.add(f.frame_index)

    def __iter__(self):
        return iter(self.frames)

    def __len__(self):
        return len(self.frames)

    @property
    def n_annotations(self) -> int:
        return sum(len(f.annotations) for f in self.frames)

    def true_counts(self) -> dict[str, int]:
        """Distinct object ids per quality; requires every annotation to carry an id."""
        ids: dict[int, str] = {}
        for f in self.frames:
            for a in f.annotations:
                if a.object_id is None:
                    raise ValueError(f"frame {f.frame_index}: annotation without 'id'")
                ids.setdefault(a.object_id, a.quality)
        counts = {lab: 0 for lab in self.labels}
        for q in ids.values():
            counts[q] += 1
        return counts


def parse_ground_truth(source, labels: Sequence[str] | None = None) -> GroundTruthStream:
    """Read a ground-truth JSON Lines stream (path, bytes or file object)."""
    active = tuple(labels) if labels is not None else None
    frames = []
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
        active = active or DEFAULT_LABELS
        idx = parse_frame_index(obj, lineno)
        objs = obj.get("objects", [])
        if not isinstance(objs, list):
            raise StreamSchemaError("'objects' must be a list", lineno)
        anns = []
        for o in objs:
            if not isinstance(o, dict) or "box" not in o or "quality" not in o:
                raise StreamSchemaError("object needs 'box' and 'quality'", lineno)
            if o["quality"] not in active:
                raise StreamSchemaError(f"unknown quality {o['quality']!r}", lineno)
            oid = o.get("id")
            if oid is not None and (isinstance(oid, bool) or not isinstance(oid, int)):
                raise StreamSchemaError("'id' must be an integer", lineno)
            anns.append(Annotation(parse_box(o["box"], lineno), o["quality"], oid))
        frames.append(GroundTruthFrame(idx, tuple(anns)))
    try:
        return GroundTruthStream(tuple(frames), check_labels(active or DEFAULT_LABELS))
    except StreamOrderError:
        raise
    except ValueError as exc:
        raise StreamSchemaError(str(exc)) from None


def write_ground_truth(gt: GroundTruthStream, fp: IO[str]) -> None:
    fp.write(json.dumps({"meta": {"labels": list(gt.labels)}}) + "\n")
    for f in gt.frames:
        objs = []
        for a in f.annotations:
            o = {"box": a.bbox.to_list(), "quality": a.quality}
            if a.object_id is not None:
                o["id"] = a.object_id
            objs.append(o)
        fp.write(json.dumps({"frame": f.frame_index, "objects": objs}) + "\n")


# ------------------------------------------------------------------ matching


@dataclass(frozen=True)
class MatchCounts:
    """Detection outcome counts. True negatives are not defined for detection and stay 0."""

    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0
    true_negatives: int = 0

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(
            self.true_positives + other.true_positives,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
            self.true_negatives + other.true_negatives,
        )


@dataclass(frozen=True)
class FrameMatch:
    counts: MatchCounts
    pairs: tuple[tuple[int, int], ...]  # (detection index, annotation index)


def _match_arrays(iou: np.ndarray, iou_threshold: float) -> list[tuple[int, int]]:
    # a pair with zero overlap is never a match, even at threshold 0
    return [(d, g) for d, g in greedy_pairs(iou, iou_threshold, strict=False) if iou[d, g] > 0]


def match_frame(dets: Sequence[Detection], gts: Sequence[Annotation],
                iou_threshold: float) -> FrameMatch:
    """Greedy one-to-one matching of detections to ground truth by descending IoU."""
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in [0, 1], got {iou_threshold}")
    if not dets or not gts:
        pairs: list[tuple[int, int]] = []
    else:
        iou = iou_matrix(boxes_to_array([d.bbox for d in dets]),
                         boxes_to_array([g.bbox for g in gts]))
        pairs = _match_arrays(iou, iou_threshold)
    tp = len(pairs)
    return FrameMatch(MatchCounts(tp, len(dets) - tp, len(gts) - tp), tuple(pairs))


def precision_recall(counts: MatchCounts) -> tuple[float, float]:
    """Precision and recall; an empty denominator gives 1.0."""
    tp, fp, fn = counts.true_positives, counts.false_positives, counts.false_negatives
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    return p, r


@dataclass(frozen=True)
class PRPoint:
    score_threshold: float
    precision: float
    recall: float
    counts: MatchCounts = MatchCounts()


class _FrameCache:
    """Per-frame IoU matrix and detection scores reused across score thresholds."""

    def __init__(self, dets: Sequence[Detection], gts: Sequence[Annotation]):
        self.scores = np.array([d.fg_score for d in dets], dtype=float)
        self.n_gt = len(gts)
        self._memo: dict = {}
        if dets and gts:
            self.iou = iou_matrix(boxes_to_array([d.bbox for d in dets]),
                                  boxes_to_array([g.bbox for g in gts]))
        else:
            self.iou = np.zeros((len(dets), len(gts)))

    def counts(self, score_threshold: float, iou_threshold: float) -> tuple[MatchCounts, list]:
        keep = np.flatnonzero(self.scores >= score_threshold)
        if keep.size == 0 or self.n_gt == 0:
            return MatchCounts(0, int(keep.size), self.n_gt), []
        # kept sets are nested in the threshold, so their size identifies them
        key = (iou_threshold, int(keep.size))
        if key not in self._memo:
            pairs = _match_arrays(self.iou[keep], iou_threshold)
            pairs = [(int(keep[d]), g) for d, g in pairs]
            tp = len(pairs)
            self._memo[key] = (MatchCounts(tp, int(keep.size) - tp, self.n_gt - tp), pairs)
        counts, pairs = self._memo[key]
        return counts, list(pairs)


def _align(stream, gt_stream) -> list[tuple[Sequence[Detection], Sequence[Annotation]]]:
    dets_by = {f.frame_index: f.detections for f in stream}
    gts_by = {f.frame_index: f.annotations for f in gt_stream}
    return [(dets_by.get(i, ()), gts_by.get(i, ())) for i in sorted(set(dets_by) | set(gts_by))]


def pr_curve(stream, gt_stream, iou_threshold: float,
             thresholds: Sequence[float]) -> list[PRPoint]:
    """Precision/recall aggregated over all frames at each score threshold.

    Frames present in only one of the two streams still count: missing
    detections become false negatives and unannotated frames false positives.
    """
    thresholds = [float(t) for t in thresholds]
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("score thresholds must be strictly increasing")
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in [0, 1], got {iou_threshold}")
    caches = [_FrameCache(d, g) for d, g in _align(stream, gt_stream)]
    curve = []
    for t in thresholds:
        total = MatchCounts()
        for c in caches:
            total = total + c.counts(t, iou_threshold)[0]
        p, r = precision_recall(total)
        curve.append(PRPoint(t, p, r, total))
    return curve


def default_thresholds(stream, max_points: int = 200) -> list[float]:
    """Distinct detection scores, thinned to at most ``max_points`` quantiles."""
    scores = np.unique([d.fg_score for f in stream for d in f.detections])
    if scores.size > max_points:
        scores = np.unique(np.quantile(scores, np.linspace(0.0, 1.0, max_points), method="lower"))
    return [float(s) for s in scores]


@dataclass(frozen=True)
class EqualErrorF1:
    """F1 (0-100 scale) where precision equals recall.

    ``interpolated`` is set when the crossing falls between two sampled
    thresholds; ``crossing`` is False when precision never meets recall and
    the sampled point closest to equality was used instead.
    """

    f1: float
    precision: float
    recall: float
    score_threshold: float
    interpolated: bool = False
    crossing: bool = True


def f1_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def f1_equal_error(curve: Sequence[PRPoint]) -> EqualErrorF1:
    if not curve:
        raise ValueError("empty precision-recall curve")
    for pt in curve:
        if pt.precision == pt.recall:
            return EqualErrorF1(100.0 * pt.precision, pt.precision, pt.recall, pt.score_threshold)
    diff = [pt.precision - pt.recall for pt in curve]
    for i in range(len(curve) - 1):
        if (diff[i] < 0) != (diff[i + 1] < 0):
            a, b = curve[i], curve[i + 1]
            t = diff[i] / (diff[i] - diff[i + 1])
            p = a.precision + t * (b.precision - a.precision)
            r = a.recall + t * (b.recall - a.recall)
            thr = a.score_threshold + t * (b.score_threshold - a.score_threshold)
            return EqualErrorF1(100.0 * f1_score(p, r), p, r, thr, interpolated=True)
    best = min(curve, key=lambda pt: abs(pt.precision - pt.recall))
    return EqualErrorF1(100.0 * f1_score(best.precision, best.recall), best.precision,
                        best.recall, best.score_threshold, crossing=False)


# ------------------------------------------------------------------ quality


@dataclass(frozen=True)
class QualityConfusion:
    """Rows are ground-truth labels, columns predicted labels."""

    labels: tuple[str, ...]
    counts: np.ndarray

    @property
    def percent(self) -> np.ndarray:
        """Row-normalized percentages; rows without samples are NaN."""
        totals = self.counts.sum(axis=1, keepdims=True).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, 100.0 * self.counts / totals, np.nan)

    def to_dict(self) -> dict:
        pct = self.percent
        return {
            "labels": list(self.labels),
            "counts": self.counts.tolist(),
            "percent": [[None if math.isnan(v) else round(float(v), 6) for v in row] for row in pct],
        }


def quality_confusion(pairs: Iterable[tuple[str, str]],
                      labels: Sequence[str] = DEFAULT_LABELS) -> QualityConfusion:
    """Confusion matrix from ``(ground_truth_label, predicted_label)`` pairs."""
    labels = tuple(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=int)
    for gt, pred in pairs:
        counts[index[gt], index[pred]] += 1
    return QualityConfusion(labels, counts)


def quality_pairs(stream, gt_stream, iou_threshold: float,
                  score_threshold: float = -math.inf) -> list[tuple[str, str]]:
    """Ground-truth and predicted (argmax) labels of matched detections."""
    labels = getattr(stream, "labels", DEFAULT_LABELS)
    out = []
    for dets, gts in _align(stream, gt_stream):
        _, pairs = _FrameCache(dets, gts).counts(score_threshold, iou_threshold)
        out.extend((gts[g].quality, dets[d].quality(labels)) for d, g in pairs)
    return out


# ------------------------------------------------------------------ counting


@dataclass(frozen=True)
class PercentError:
    """Counting error in percent; ``None`` where the true count is zero and the estimate is not."""

    per_quality: Mapping[str, float | None]
    total: float | None

    @property
    def undefined(self) -> tuple[str, ...]:
        bad = [k for k, v in self.per_quality.items() if v is None]
        if self.total is None:
            bad.append("total")
        return tuple(bad)

    def to_dict(self) -> dict:
        return {"per_quality": dict(self.per_quality), "total": self.total,
                "undefined": list(self.undefined)}


def percent_error(estimated: float, truth: float) -> float | None:
    if truth == 0:
        return 0.0 if estimated == 0 else None
    return 100.0 * abs(estimated - truth) / truth


def count_percent_error(estimated: CountReport | Mapping[str, int],
                        truth: Mapping[str, int]) -> PercentError:
    """``100 * |estimated - truth| / truth`` per quality and for the total."""
    est = estimated.counts if isinstance(estimated, CountReport) else estimated
    missing = set(truth) - set(est)
    if missing:
        raise ValueError(f"estimate lacks counts for {sorted(missing)}")
    per_q = {lab: percent_error(est[lab], truth[lab]) for lab in truth}
    total = percent_error(sum(est[lab] for lab in truth), sum(truth.values()))
    return PercentError(per_q, total)


# ------------------------------------------------------------------ reports


def write_pr_csv(curve: Sequence[PRPoint], fp: IO[str]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["threshold", "precision", "recall"])
    for pt in curve:
        w.writerow([repr(pt.score_threshold), repr(pt.precision), repr(pt.recall)])


def evaluate(stream: DetectionStream, gt_stream: GroundTruthStream,
             iou_grid: Sequence[float], thresholds: Sequence[float] | None = None) -> dict:
    """Full metric report: PR curve, equal-error F1 and quality confusion per IoU level."""
    if thresholds is None:
        thresholds = default_thresholds(stream)
    levels = []
    curves = {}
    for iou_t in iou_grid:
        curve = pr_curve(stream, gt_stream, iou_t, thresholds) if thresholds else []
        curves[iou_t] = curve
        entry: dict = {"iou_threshold": iou_t, "n_points": len(curve)}
        if curve:
            eq = f1_equal_error(curve)
            conf = quality_confusion(
                quality_pairs(stream, gt_stream, iou_t, eq.score_threshold), stream.labels)
            entry.update({
                "f1": eq.f1, "precision": eq.precision, "recall": eq.recall,
                "score_threshold": eq.score_threshold, "interpolated": eq.interpolated,
                "crossing": eq.crossing, "confusion": conf.to_dict(),
            })
        levels.append(entry)
    return {"labels": list(stream.labels), "n_ground_truth": gt_stream.n_annotations,
            "n_detections": stream.n_detections, "levels": levels, "curves": curves}
