import io
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fruitcount.detections import (
    DetectionStream,
    FrameDetections,
    MultiClassDetection,
    StreamOrderError,
    StreamParseError,
    StreamSchemaError,
    dumps_stream,
    filter_by_score,
    from_multiclass,
    parse_stream,
)
from fruitcount.geometry import BoundingBox

from conftest import det, frame

Q = {"green": 0.7, "mixed": 0.2, "red": 0.1}


def line(idx, n=1, fg=0.9):
    dets = [{"box": [10 * k, 0, 10 * k + 5, 5], "fg": fg, "quality": Q} for k in range(n)]
    return json.dumps({"frame": idx, "detections": dets})


def lines(*rows):
    return ("\n".join(rows) + "\n").encode()


def test_empty_source():
    s = parse_stream(b"")
    assert len(s) == 0 and s.n_detections == 0


def test_two_lines_in_order():
    s = parse_stream(lines(line(0, 2), line(3, 1)))
    assert [f.frame_index for f in s] == [0, 3]
    assert s.n_detections == 3
    assert s[0].detections[1].bbox == BoundingBox(10, 0, 15, 5)


def test_decreasing_index_names_line_2():
    with pytest.raises(StreamOrderError) as err:
        parse_stream(lines(line(5), line(3)))
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_repeated_index_is_an_ordering_error():
    with pytest.raises(StreamOrderError):
        parse_stream(lines(line(1), line(1)))


def test_missing_quality_key():
    bad = json.dumps({"frame": 0, "detections": [
        {"box": [0, 0, 1, 1], "fg": 0.5, "quality": {"green": 0.5, "red": 0.1}}]})
    with pytest.raises(StreamSchemaError, match="mixed"):
        parse_stream(lines(bad))


def test_malformed_json_reports_line():
    src = lines(line(0), line(1), "{not json", line(3))
    with pytest.raises(StreamParseError) as err:
        parse_stream(src)
    assert err.value.line == 3


@pytest.mark.parametrize("record", [
    {"frame": -1, "detections": []},
    {"frame": "0", "detections": []},
    {"frame": 1, "detections": {}},
    {"frame": 1, "detections": [{"box": [0, 0, 1], "fg": 1, "quality": Q}]},
    {"frame": 1, "detections": [{"box": [5, 0, 1, 1], "fg": 1, "quality": Q}]},
    {"frame": 1, "detections": [{"box": [0, 0, 1, 1], "quality": Q}]},
    {"frame": 1, "detections": [{"box": [0, 0, 1, 1], "fg": "high", "quality": Q}]},
])
def test_schema_errors(record):
    with pytest.raises(StreamSchemaError) as err:
        parse_stream(lines(line(0), json.dumps(record)))
    assert err.value.line == 2


def test_blank_lines_skipped_but_counted():
    src = lines(line(0), "", "[1, 2]")
    with pytest.raises(StreamSchemaError) as err:
        parse_stream(src)
    assert err.value.line == 3


def test_meta_header():
    header = json.dumps({"meta": {"width": 640, "height": 480, "labels": ["unripe", "ripe"]}})
    rec = json.dumps({"frame": 0, "detections": [
        {"box": [0, 0, 4, 4], "fg": 0.3, "quality": {"unripe": 0.1, "ripe": 0.8}}]})
    s = parse_stream(lines(header, rec))
    assert (s.width, s.height, s.labels) == (640.0, 480.0, ("unripe", "ripe"))
    assert s[0].detections[0].quality(s.labels) == "ripe"


def test_meta_only_on_first_line():
    with pytest.raises(StreamSchemaError):
        parse_stream(lines(line(0), json.dumps({"meta": {}})))


def test_classes_record_converted():
    rec = json.dumps({"frame": 0, "detections": [
        {"box": [0, 0, 4, 4], "classes": {"bg": 0.1, "green": 0.7, "mixed": 0.2, "red": 0.3}}]})
    d = parse_stream(lines(rec))[0].detections[0]
    assert d.fg_score == 0.7
    assert d.quality(("green", "mixed", "red")) == "green"


def test_reads_paths_and_text_files(tmp_path):
    p = tmp_path / "s.jsonl"
    p.write_bytes(lines(line(0), line(1)))
    assert len(parse_stream(p)) == 2
    assert len(parse_stream(str(p))) == 2
    assert len(parse_stream(io.StringIO(p.read_text()))) == 2


def mc(**scores):
    return MultiClassDetection(BoundingBox(0, 0, 1, 1), scores)


def test_from_multiclass_examples():
    d = from_multiclass(mc(bg=0.1, green=0.7, mixed=0.2, red=0.3))
    assert d.fg_score == 0.7 and d.quality(("green", "mixed", "red")) == "green"
    d = from_multiclass(mc(bg=0.2, green=0.4, mixed=0.4, red=0.4))
    assert d.fg_score == 0.4
    d = from_multiclass(mc(bg=0.9, green=0.05, mixed=0.03, red=0.02))
    assert d.fg_score == 0.05


def test_from_multiclass_requires_all_classes():
    with pytest.raises(ValueError):
        from_multiclass(mc(green=0.7, mixed=0.2, red=0.3))


def test_filter_by_score():
    frames = [frame(0, det(0, 0, 1, 1, fg=0.2), det(2, 0, 3, 1, fg=0.6)),
              frame(1, det(0, 0, 1, 1, fg=0.9))]
    assert filter_by_score(frames, -math.inf) == frames
    assert all(not f.detections for f in filter_by_score(frames, 1.5))
    kept = filter_by_score(frames, 0.5)
    assert sum(len(f.detections) for f in kept) == 2
    assert [f.frame_index for f in kept] == [0, 1]


def test_filter_keeps_stream_type():
    s = DetectionStream((frame(0, det(0, 0, 1, 1, fg=0.2)),), width=10, height=10)
    out = filter_by_score(s, 0.5)
    assert isinstance(out, DetectionStream) and out.width == 10 and out.n_detections == 0


def test_stream_rejects_wrong_quality_keys():
    with pytest.raises(StreamSchemaError):
        DetectionStream((frame(0, det(0, 0, 1, 1)),), labels=("a", "b"))


@st.composite
def streams(draw):
    idx = sorted(draw(st.sets(st.integers(0, 50), max_size=6)))
    frames = []
    for i in idx:
        n = draw(st.integers(0, 3))
        dets = []
        for _ in range(n):
            x = draw(st.floats(0, 100, allow_nan=False))
            y = draw(st.floats(0, 100, allow_nan=False))
            w = draw(st.floats(0.5, 50, allow_nan=False))
            fg = draw(st.floats(-5, 5, allow_nan=False))
            q = draw(st.sampled_from(["green", "mixed", "red"]))
            dets.append(det(x, y, x + w, y + w, fg=fg, quality=q))
        frames.append(FrameDetections(i, tuple(dets)))
    return DetectionStream(tuple(frames), width=200.0, height=150.0)


@given(streams())
def test_write_parse_round_trip(s):
    text = dumps_stream(s)
    back = parse_stream(text.encode())
    assert back == s
    assert dumps_stream(back) == text
