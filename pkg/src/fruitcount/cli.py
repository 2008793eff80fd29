"""Command-line entry point: ``fruitcount {track,evaluate,simulate,tune}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .detections import StreamError, parse_stream, write_stream
from .estimator import TrackCounter
from .metrics import (
    count_percent_error,
    evaluate,
    parse_ground_truth,
    write_ground_truth,
    write_pr_csv,
)
from .simulate import NoiseConfig, SceneConfig, generate, row_scene
from .tracker import TrackerStateError
from .tune import GridSpec, grid_search

log = logging.getLogger("fruitcount")

TRACKER_KEYS = ("gamma_dt", "gamma_merge", "gamma_bndry", "z_start", "z_stop", "direction",
                "max_misses", "min_track_detections", "init_frame_zone_filter", "width", "height")
DEFAULT_IOU_GRID = (0.2, 0.3, 0.4, 0.5, 0.6)


class CLIError(Exception):
    pass


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _tracker_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tracker")
    g.add_argument("--config", type=Path, help="JSON file with tracker parameters")
    g.add_argument("--gamma-dt", type=float)
    g.add_argument("--gamma-merge", type=float)
    g.add_argument("--gamma-bndry", type=float)
    g.add_argument("--z-start", type=float)
    g.add_argument("--z-stop", type=float)
    g.add_argument("--direction", choices=("ltr", "rtl"))
    g.add_argument("--max-misses", type=int)
    g.add_argument("--min-track-detections", type=int)
    g.add_argument("--init-frame-zone-filter", action="store_true", default=None)
    g.add_argument("--width", type=float, help="image width if the stream has no header")
    g.add_argument("--height", type=float, help="image height if the stream has no header")


def build_counter(args) -> TrackCounter:
    params: dict = {}
    if args.config is not None:
        cfg = _read_json(args.config)
        unknown = set(cfg) - set(TRACKER_KEYS)
        if unknown:
            raise CLIError(f"{args.config}: unknown tracker parameter(s) {sorted(unknown)}")
        params.update(cfg)
    for key in TRACKER_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return TrackCounter(**params)


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno})") from None


def _load(reader, path: Path, **kwargs):
    try:
        return reader(path, **kwargs)
    except StreamError as exc:
        raise CLIError(f"{path}: {exc}") from None


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_counts(path: Path) -> dict[str, int]:
    obj = _read_json(path)
    counts = obj.get("counts", obj) if isinstance(obj, dict) else None
    if not isinstance(counts, dict) or not all(
            isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in counts.values()):
        raise CLIError(f"{path}: expected a mapping of label -> non-negative integer count")
    return {k: v for k, v in counts.items() if k != "total"}


# ------------------------------------------------------------------ commands


def cmd_track(args) -> int:
    counter = build_counter(args)
    stream = _load(parse_stream, args.detections)
    report, updates = counter.track(stream)
    out = _out_dir(args)
    _write_json(out / "counts.json", report.to_dict())
    if not args.no_audit:
        with open(out / "audit.jsonl", "w", encoding="utf-8") as fh:
            for u in updates:
                fh.write(json.dumps(u.to_dict()) + "\n")
    print(json.dumps({"counts": dict(report.counts), "total": report.total}))
    return 0


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    result: dict = {}
    if args.estimated_counts or args.true_counts:
        if not (args.estimated_counts and args.true_counts):
            raise CLIError("--estimated-counts and --true-counts must be given together")
        err = count_percent_error(_read_counts(args.estimated_counts), _read_counts(args.true_counts))
        result["percent_error"] = err.to_dict()
    if args.detections or args.ground_truth:
        if not (args.detections and args.ground_truth):
            raise CLIError("detections and ground truth must be given together")
        stream = _load(parse_stream, args.detections)
        gt = _load(parse_ground_truth, args.ground_truth, labels=stream.labels)
        report = evaluate(stream, gt, args.iou_grid, args.thresholds)
        for iou_t, curve in report.pop("curves").items():
            with open(out / f"pr_iou{iou_t:g}.csv", "w", encoding="utf-8") as fh:
                write_pr_csv(curve, fh)
        result["detection"] = report
    if not result:
        raise CLIError("nothing to evaluate: give DETECTIONS GROUND_TRUTH and/or count files")
    _write_json(out / "metrics.json", result)
    summary = {}
    if "percent_error" in result:
        summary["percent_error"] = result["percent_error"]
    if "detection" in result:
        summary["f1"] = {f"{lvl['iou_threshold']:g}": lvl.get("f1") for lvl in result["detection"]["levels"]}
    print(json.dumps(summary))
    return 0


def cmd_simulate(args) -> int:
    if args.scene is not None:
        d = _read_json(args.scene)
        if args.seed is not None:
            d["seed"] = args.seed
        scene = SceneConfig.from_dict(d)
    else:
        noise = NoiseConfig(args.miss_prob, args.jitter, args.fp_rate, args.flip_prob)
        scene = row_scene(args.n_fruits, seed=args.seed or 0, width=args.width, height=args.height,
                          direction=args.direction, noise=noise)
    sim = generate(scene)
    out = _out_dir(args)
    _write_json(out / "scene.json", scene.to_dict())
    with open(out / "detections.jsonl", "w", encoding="utf-8") as fh:
        write_stream(sim.detections, fh)
    with open(out / "ground_truth.jsonl", "w", encoding="utf-8") as fh:
        write_ground_truth(sim.ground_truth, fh)
    _write_json(out / "truth_counts.json", {"counts": dict(sim.true_counts), "total": sim.true_total})
    print(json.dumps({"frames": len(sim.detections), "counts": dict(sim.true_counts)}))
    return 0


def cmd_tune(args) -> int:
    base = build_counter(args)
    streams, truths = [], []
    for det_path, counts_path in args.stream:
        streams.append(_load(parse_stream, det_path))
        truths.append(_read_counts(counts_path))
    grid = GridSpec(args.dt_grid, args.merge_grid, args.bndry_grid)
    res = grid_search(streams, truths, grid, base=base)
    out = _out_dir(args)
    best = {k: v for k, v in res.best_estimator.get_params().items() if v is not None}
    obj = res.objectives[tuple(res.best_params[k] for k in ("gamma_dt", "gamma_merge", "gamma_bndry"))]
    _write_json(out / "best_config.json", best)
    with open(out / "grid.csv", "w", encoding="utf-8") as fh:
        res.write_csv(fh, streams[0].labels)
    print(json.dumps({"best": dict(res.best_params), "total_error": obj[0], "quality_error": obj[1]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fruitcount", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="count objects in a detection stream")
    p.add_argument("detections", type=Path)
    p.add_argument("--out", default="out")
    p.add_argument("--no-audit", action="store_true", help="skip the per-frame audit file")
    p.add_argument("--seed", type=int, help="accepted for uniformity; tracking is deterministic")
    _tracker_args(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="PR curves / F1 and count percent errors")
    p.add_argument("detections", type=Path, nargs="?")
    p.add_argument("ground_truth", type=Path, nargs="?")
    p.add_argument("--iou-grid", type=float_list, default=list(DEFAULT_IOU_GRID))
    p.add_argument("--thresholds", type=float_list, help="score thresholds (default: from the data)")
    p.add_argument("--estimated-counts", type=Path)
    p.add_argument("--true-counts", type=Path)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, help="accepted for uniformity; evaluation is deterministic")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="generate a synthetic detection stream and ground truth")
    p.add_argument("--scene", type=Path, help="scene JSON; default is a random row of fruit")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-fruits", type=int, default=50)
    p.add_argument("--width", type=float, default=640.0)
    p.add_argument("--height", type=float, default=480.0)
    p.add_argument("--direction", choices=("ltr", "rtl"), default="rtl")
    p.add_argument("--miss-prob", type=float, default=0.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--fp-rate", type=float, default=0.0)
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tune", help="grid search the association thresholds")
    p.add_argument("--stream", nargs=2, action="append", required=True, type=Path,
                   metavar=("DETECTIONS", "COUNTS"), help="detections plus true counts; repeatable")
    p.add_argument("--dt-grid", type=float_list, default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
    p.add_argument("--merge-grid", type=float_list, default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    p.add_argument("--bndry-grid", type=float_list, default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    p.add_argument("--seed", type=int, help="accepted for uniformity; tuning is deterministic")
    p.add_argument("--out", default="out")
    _tracker_args(p)
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CLIError, ValueError, TrackerStateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
