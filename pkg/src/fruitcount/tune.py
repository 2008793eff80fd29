"""Exhaustive grid search over the three association thresholds."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

from sklearn.base import clone

from .estimator import TrackCounter, check_stream


@dataclass(frozen=True)
class GridSpec:
    gamma_dt: Sequence[float]
    gamma_merge: Sequence[float]
    gamma_bndry: Sequence[float]

    def __post_init__(self):
        for name in ("gamma_dt", "gamma_merge", "gamma_bndry"):
            values = [float(v) for v in getattr(self, name)]
            if not values:
                raise ValueError(f"grid for {name} is empty")
            if any(not 0.0 <= v <= 1.0 for v in values):
                raise ValueError(f"grid for {name} has values outside [0, 1]")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ValueError(f"grid for {name} must be strictly increasing")
            object.__setattr__(self, name, tuple(values))

    def cells(self):
        return itertools.product(self.gamma_dt, self.gamma_merge, self.gamma_bndry)

    def __len__(self):
        return len(self.gamma_dt) * len(self.gamma_merge) * len(self.gamma_bndry)


@dataclass(frozen=True)
class GridRow:
    gamma_dt: float
    gamma_merge: float
    gamma_bndry: float
    stream: int
    counts: Mapping[str, int]
    truth: Mapping[str, int]

    @property
    def total_error(self) -> int:
        return abs(sum(self.counts.values()) - sum(self.truth.values()))

    @property
    def quality_error(self) -> int:
        return sum(abs(self.counts[k] - self.truth[k]) for k in self.truth)


@dataclass(frozen=True)
class GridResult:
    best_params: Mapping[str, float]
    best_estimator: TrackCounter
    rows: tuple[GridRow, ...]
    objectives: Mapping[tuple[float, float, float], tuple[int, int]]

    def write_csv(self, fp: IO[str], labels: Sequence[str]) -> None:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["gamma_dt", "gamma_merge", "gamma_bndry", "stream",
                    *labels, "total", "total_error", "quality_error"])
        for r in self.rows:
            w.writerow([r.gamma_dt, r.gamma_merge, r.gamma_bndry, r.stream,
                        *(r.counts[lab] for lab in labels), sum(r.counts.values()),
                        r.total_error, r.quality_error])


def grid_search(streams: Sequence, truths: Sequence[Mapping[str, int]], grid: GridSpec,
                base: TrackCounter | None = None) -> GridResult:
    """Run every grid cell on every stream and pick the lowest count error.

    The objective is the summed absolute total-count error; ties go to
    the lower summed per-quality error, then to the smallest ``gamma_dt``
    (then ``gamma_merge``, ``gamma_bndry``).
    """
    if not streams:
        raise ValueError("grid search needs at least one stream")
    if len(streams) != len(truths):
        raise ValueError("one truth count mapping is required per stream")
    streams = [check_stream(s) for s in streams]
    base = base if base is not None else TrackCounter()
    rows = []
    objectives = {}
    for cell in grid.cells():
        est = clone(base).set_params(gamma_dt=cell[0], gamma_merge=cell[1], gamma_bndry=cell[2])
        tot = qual = 0
        for i, (s, truth) in enumerate(zip(streams, truths)):
            rep = est.count(s)
            row = GridRow(*cell, stream=i, counts=dict(rep.counts), truth=dict(truth))
            rows.append(row)
            tot += row.total_error
            qual += row.quality_error
        objectives[cell] = (tot, qual)
    best = min(objectives, key=lambda c: (*objectives[c], *c))
    params = dict(zip(("gamma_dt", "gamma_merge", "gamma_bndry"), best))
    return GridResult(params, clone(base).set_params(**params), tuple(rows), objectives)
