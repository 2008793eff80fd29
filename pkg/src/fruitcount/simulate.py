"""Synthetic camera passes along a crop row.

Every fruit is a rigid box sliding across the image at constant speed.
Ground truth holds the exact (clipped) boxes; the detection stream adds
seeded noise: dropped detections, center jitter, spurious boxes and
quality flips.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .detections import DEFAULT_LABELS, Detection, DetectionStream, FrameDetections, check_labels
from .geometry import BoundingBox, Direction
from .metrics import Annotation, GroundTruthFrame, GroundTruthStream


@dataclass(frozen=True)
class Fruit:
    """A fruit's box at frame 0, in image pixel coordinates (may lie off-screen)."""

    x: float
    y: float
    width: float
    height: float
    quality: str

    @property
    def box(self) -> BoundingBox:
        return BoundingBox(self.x, self.y, self.x + self.width, self.y + self.height)


@dataclass(frozen=True)
class NoiseConfig:
    miss_prob: float = 0.0
    jitter: float = 0.0  # center jitter std as a fraction of box size
    fp_rate: float = 0.0  # mean spurious detections per frame (Poisson)
    flip_prob: float = 0.0

    def __post_init__(self):
        for name in ("miss_prob", "flip_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.jitter < 0 or self.fp_rate < 0:
            raise ValueError("jitter and fp_rate must be non-negative")


@dataclass(frozen=True)
class SceneConfig:
    width: float
    height: float
    fruits: tuple[Fruit, ...]
    speed: float
    n_frames: int
    direction: Direction = Direction.RIGHT_TO_LEFT
    noise: NoiseConfig = NoiseConfig()
    seed: int = 0
    labels: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self):
        object.__setattr__(self, "fruits", tuple(self.fruits))
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "labels", check_labels(self.labels))
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image width and height must be positive")
        if not self.speed > 0:
            raise ValueError("camera speed must be positive")
        if self.n_frames < 1:
            raise ValueError("need at least one frame")
        for f in self.fruits:
            if f.quality not in self.labels:
                raise ValueError(f"fruit quality {f.quality!r} not in {self.labels}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["direction"] = self.direction.value
        d["labels"] = list(self.labels)
        d["fruits"] = [asdict(f) for f in self.fruits]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SceneConfig":
        d = dict(d)
        d["fruits"] = tuple(Fruit(**f) for f in d.get("fruits", ()))
        d["noise"] = NoiseConfig(**d.get("noise", {}))
        if "labels" in d:
            d["labels"] = tuple(d["labels"])
        return cls(**d)


@dataclass(frozen=True)
class SimulatedScene:
    detections: DetectionStream
    ground_truth: GroundTruthStream
    true_counts: Mapping[str, int] = field(default_factory=dict)

    @property
    def true_total(self) -> int:
        return sum(self.true_counts.values())


def _scores(rng: np.random.Generator, label: str, labels: Sequence[str],
            fg_lo: float, fg_hi: float) -> tuple[float, dict[str, float]]:
    # winning label in [0.6, 0.95), the rest below 0.3, so the argmax is always `label`
    u = rng.random(len(labels) + 1)
    fg = fg_lo + (fg_hi - fg_lo) * float(u[0])
    quality = {lab: (0.6 + 0.35 * float(v) if lab == label else 0.3 * float(v))
               for lab, v in zip(labels, u[1:])}
    return fg, quality


def generate(cfg: SceneConfig) -> SimulatedScene:
    """Render detections and ground truth for every frame; deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    noise = cfg.noise
    labels = cfg.labels
    sign = -1.0 if cfg.direction is Direction.RIGHT_TO_LEFT else 1.0
    W, H = float(cfg.width), float(cfg.height)
    x_lo = np.array([f.x for f in cfg.fruits], dtype=float)
    x_hi = np.array([f.x + f.width for f in cfg.fruits], dtype=float)
    y_ok = np.array([f.y < H and f.y + f.height > 0 for f in cfg.fruits], dtype=bool)
    sizes = [(f.width, f.height) for f in cfg.fruits] or [(0.1 * W, 0.1 * H)]

    def clipped(x0, y0, x1, y1):
        x0, y0, x1, y1 = max(x0, 0.0), max(y0, 0.0), min(x1, W), min(y1, H)
        return BoundingBox(x0, y0, x1, y1) if x0 < x1 and y0 < y1 else None

    det_frames, gt_frames = [], []
    seen: dict[int, str] = {}
    for k in range(cfg.n_frames):
        shift = sign * cfg.speed * k
        visible = np.flatnonzero(y_ok & (x_lo + shift < W) & (x_hi + shift > 0))
        dets, anns = [], []
        for i in visible:
            i = int(i)
            fruit = cfg.fruits[i]
            x0, y0 = fruit.x + shift, fruit.y
            x1, y1 = x0 + fruit.width, y0 + fruit.height
            gt_box = clipped(x0, y0, x1, y1)
            if gt_box is None:
                continue
            anns.append(Annotation(gt_box, fruit.quality, i))
            seen.setdefault(i, fruit.quality)

            if noise.miss_prob and rng.random() < noise.miss_prob:
                continue
            if noise.jitter:
                zx, zy = rng.standard_normal(2)
                dx = float(zx) * noise.jitter * fruit.width
                dy = float(zy) * noise.jitter * fruit.height
                det_box = clipped(x0 + dx, y0 + dy, x1 + dx, y1 + dy)
                if det_box is None:
                    continue
            else:
                det_box = gt_box
            label = fruit.quality
            if noise.flip_prob and len(labels) > 1 and rng.random() < noise.flip_prob:
                others = [lab for lab in labels if lab != label]
                label = others[int(rng.integers(len(others)))]
            fg, quality = _scores(rng, label, labels, 0.5, 1.0)
            dets.append(Detection(det_box, fg, quality))

        n_fp = int(rng.poisson(noise.fp_rate)) if noise.fp_rate else 0
        for _ in range(n_fp):
            w, h = sizes[int(rng.integers(len(sizes)))]
            w, h = min(w, W), min(h, H)
            x0 = rng.uniform(0.0, W - w) if W > w else 0.0
            y0 = rng.uniform(0.0, H - h) if H > h else 0.0
            label = labels[int(rng.integers(len(labels)))]
            fg, quality = _scores(rng, label, labels, 0.05, 0.7)
            dets.append(Detection(BoundingBox(x0, y0, x0 + w, y0 + h), fg, quality))

        det_frames.append(FrameDetections(k, tuple(dets)))
        gt_frames.append(GroundTruthFrame(k, tuple(anns)))

    counts = {lab: 0 for lab in labels}
    for q in seen.values():
        counts[q] += 1
    meta = {"width": cfg.width, "height": cfg.height, "labels": list(labels),
            "direction": cfg.direction.value}
    return SimulatedScene(
        DetectionStream(tuple(det_frames), labels, cfg.width, cfg.height, meta),
        GroundTruthStream(tuple(gt_frames), labels),
        counts,
    )


def frames_to_clear(fruits: Sequence[Fruit], width: float, speed: float,
                    direction: Direction | str = Direction.RIGHT_TO_LEFT) -> int:
    """Frames needed for every fruit to leave the image completely."""
    if not fruits:
        return 1
    if Direction(direction) is Direction.RIGHT_TO_LEFT:
        dist = max(f.x + f.width for f in fruits)
    else:
        dist = max(width - f.x for f in fruits)
    return max(1, math.ceil(dist / speed) + 1)


def row_scene(n_fruits: int, seed: int = 0, width: float = 640.0, height: float = 480.0,
              size_range: tuple[float, float] = (24.0, 32.0), speed: float | None = None,
              direction: Direction | str = Direction.RIGHT_TO_LEFT,
              noise: NoiseConfig = NoiseConfig(), labels: Sequence[str] = DEFAULT_LABELS,
              quality_weights: Sequence[float] | None = None) -> SceneConfig:
    """Random non-overlapping fruit laid out in horizontal lanes, all starting off-screen.

    Every fruit enters from the entry edge, crosses the whole image and
    leaves before the last frame. Horizontal gaps exceed the per-frame
    displacement, so without noise no two fruits' boxes ever overlap
    across consecutive frames.
    """
    labels = check_labels(labels)
    direction = Direction(direction)
    rng = np.random.default_rng([seed, 1])
    smin, smax = size_range
    if speed is None:
        speed = 0.12 * smin
    lane_pitch = smax * 1.25
    n_lanes = max(1, int(height // lane_pitch))
    gap_min = speed + 0.3 * smin
    gap_max = gap_min + 0.5 * smin
    cursors = width + rng.uniform(0.0, lane_pitch, size=n_lanes)
    fruits = []
    for i in range(n_fruits):
        lane = i % n_lanes
        w, h = rng.uniform(smin, smax, size=2)
        y = lane * lane_pitch + rng.uniform(0.0, lane_pitch - h)
        x = cursors[lane]
        cursors[lane] = x + w + rng.uniform(gap_min, gap_max)
        if direction is Direction.LEFT_TO_RIGHT:
            x = width - (x + w)
        q = labels[int(rng.choice(len(labels), p=quality_weights))]
        fruits.append(Fruit(float(x), float(y), float(w), float(h), q))
    return SceneConfig(
        width=width, height=height, fruits=tuple(fruits), speed=float(speed),
        n_frames=frames_to_clear(fruits, width, speed, direction), direction=direction,
        noise=noise, seed=seed, labels=labels,
    )


def partial_view_scene(width: float = 640.0, height: float = 480.0, fruit_size: float = 60.0,
                       speed: float = 8.0, n_frames: int | None = None,
                       direction: Direction | str = Direction.RIGHT_TO_LEFT,
                       quality: str = "red", seed: int = 0) -> SceneConfig:
    """One fruit entering from the edge; its first visible box is a thin sliver.

    The fruit starts one half-step beyond the entry edge, so its first
    visible box is ``speed / 2`` pixels wide, well under half its full area
    whenever ``speed < fruit_size``.
    """
    direction = Direction(direction)
    x = width - 0.5 * speed if direction is Direction.RIGHT_TO_LEFT else 0.5 * speed - fruit_size
    # the sliver appears at frame 1
    x += speed if direction is Direction.RIGHT_TO_LEFT else -speed
    fruit = Fruit(x, (height - fruit_size) / 2.0, fruit_size, fruit_size, quality)
    if n_frames is None:
        n_frames = frames_to_clear([fruit], width, speed, direction)
    return SceneConfig(width, height, (fruit,), speed, n_frames, direction, seed=seed)


def partial_view_fixture(**kwargs) -> SimulatedScene:
    return generate(partial_view_scene(**kwargs))
