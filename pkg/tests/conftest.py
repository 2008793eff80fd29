import pytest

from fruitcount.detections import DEFAULT_LABELS, Detection, FrameDetections
from fruitcount.geometry import BoundingBox, ImageGeometry
from fruitcount.tracker import Tracker, TrackerConfig

WIDTH, HEIGHT = 1000.0, 500.0


def det(x0, y0, x1, y1, fg=0.9, quality="green", score=0.8, labels=DEFAULT_LABELS):
    """Detection whose argmax quality is ``quality``."""
    q = {lab: (score if lab == quality else 0.1) for lab in labels}
    return Detection(BoundingBox(x0, y0, x1, y1), fg, q)


def frame(index, *dets):
    return FrameDetections(index, tuple(dets))


def make_tracker(**kw):
    geo = kw.pop("geometry", None) or ImageGeometry(WIDTH, HEIGHT)
    return Tracker(TrackerConfig(geometry=geo, **kw))


@pytest.fixture
def tracker():
    return make_tracker()


# published count table: quality -> (estimated, true)
TABLE_COUNTS = {"green": (159, 179), "mixed": (38, 34), "red": (227, 229)}
TABLE_ERRORS = {"green": 11.2, "mixed": 11.8, "red": 0.9, "total": 4.1}


def crossing_fixture(n_gt=1000, tp=773, fp=227, score=0.8):
    """Detections and ground truth with precision == recall == tp / n_gt at one score."""
    from fruitcount.detections import DetectionStream
    from fruitcount.metrics import Annotation, GroundTruthFrame, GroundTruthStream

    def box(i, row_offset=0):
        r, c = divmod(i, 40)
        x, y = 20.0 * c, 20.0 * (r + row_offset)
        return x, y, x + 10, y + 10

    gts = tuple(Annotation(BoundingBox(*box(i)), "red", i) for i in range(n_gt))
    dets = [det(*box(i), fg=score, quality="red") for i in range(tp)]
    dets += [det(*box(i, row_offset=100), fg=score, quality="red") for i in range(fp)]
    stream = DetectionStream((FrameDetections(0, tuple(dets)),), width=1000, height=5000)
    return stream, GroundTruthStream((GroundTruthFrame(0, gts),))


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number, name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {name}" + (f" ({detail})" if detail else "")
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
