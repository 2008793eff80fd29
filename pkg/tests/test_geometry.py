import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fruitcount.geometry import (
    BoundingBox,
    Direction,
    ImageGeometry,
    Zone,
    area,
    boundary_matrix,
    boundary_measure,
    boxes_to_array,
    intersection_area,
    iou,
    iou_matrix,
    zone_of,
)

coord = st.floats(-500, 500, allow_nan=False, allow_infinity=False)
side = st.floats(0.5, 300, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw):
    x, y = draw(coord), draw(coord)
    return BoundingBox(x, y, x + draw(side), y + draw(side))


@pytest.mark.parametrize("coords, expected", [
    ((0, 0, 10, 10), 100.0),
    ((0, 0, 1, 1), 1.0),
    ((2.5, 0, 7.5, 4), 20.0),
])
def test_area(coords, expected):
    assert area(BoundingBox(*coords)) == expected


def test_intersection_examples():
    a = BoundingBox(0, 0, 10, 10)
    assert intersection_area(a, a) == area(a)
    assert intersection_area(a, BoundingBox(20, 20, 30, 30)) == 0.0
    assert intersection_area(a, BoundingBox(5, 0, 15, 10)) == 50.0


def test_iou_examples():
    a = BoundingBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(20, 0, 30, 10)) == 0.0
    assert iou(a, BoundingBox(5, 0, 15, 10)) == pytest.approx(1 / 3)
    # touching edges share no area
    assert iou(a, BoundingBox(10, 0, 20, 10)) == 0.0


def test_boundary_examples():
    track = BoundingBox(0, 0, 10, 10)
    assert boundary_measure(track, BoundingBox(2, 2, 4, 4)) == 1.0
    assert boundary_measure(track, BoundingBox(20, 0, 30, 10)) == 0.0
    assert boundary_measure(track, BoundingBox(5, 0, 15, 10)) == 0.5
    # asymmetric: the big box is only a quarter inside the small one
    assert boundary_measure(BoundingBox(0, 0, 5, 10), track) == 0.5


@pytest.mark.parametrize("frac, expected", [
    (0.95, Zone.START),
    (0.8, Zone.START),
    (0.5, Zone.MIDDLE),
    (0.15, Zone.STOP),
    (0.10, Zone.STOP),
    (0.16, Zone.MIDDLE),
])
def test_zone_rtl(frac, expected):
    g = ImageGeometry(1000, 500, Direction.RIGHT_TO_LEFT, z_start=0.2, z_stop=0.15)
    cx = 1000 * frac
    assert zone_of(BoundingBox(cx - 5, 100, cx + 5, 110), g) is expected


def test_zone_ltr_is_mirrored():
    g = ImageGeometry(1000, 500, Direction.LEFT_TO_RIGHT, z_start=0.2, z_stop=0.15)
    assert zone_of(BoundingBox(40, 0, 60, 10), g) is Zone.START
    assert zone_of(BoundingBox(940, 0, 960, 10), g) is Zone.STOP
    assert zone_of(BoundingBox(490, 0, 510, 10), g) is Zone.MIDDLE


def test_zero_width_zones_never_match():
    g = ImageGeometry(100, 100, z_start=0.0, z_stop=0.0)
    for x in (0, 50, 99):
        assert zone_of(BoundingBox(x, 0, x + 1, 1), g) is Zone.MIDDLE


@pytest.mark.parametrize("coords", [
    (0, 0, 0, 10),
    (5, 0, 1, 10),
    (0, 0, math.nan, 1),
    (0, 0, math.inf, 1),
])
def test_degenerate_box_rejected(coords):
    with pytest.raises(ValueError):
        BoundingBox(*coords)


def test_geometry_rejects_overlapping_zones():
    with pytest.raises(ValueError):
        ImageGeometry(100, 100, z_start=0.6, z_stop=0.5)


def test_clip():
    b = BoundingBox(-5, -5, 5, 5)
    assert b.clip(100, 100) == BoundingBox(0, 0, 5, 5)
    assert BoundingBox(200, 0, 210, 10).clip(100, 100) is None


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes())
def test_iou_identity(a):
    assert iou(a, a) == 1.0


@given(boxes(), boxes())
def test_boundary_dominates_iou(a, b):
    bm = boundary_measure(a, b)
    assert 0.0 <= bm <= 1.0
    assert bm >= iou(a, b)


@given(boxes(), boxes(), st.integers(-100, 100), st.integers(-100, 100))
def test_iou_translation_invariant(a, b, dx, dy):
    # integer shifts keep the float arithmetic close enough to compare
    assert iou(a.translate(dx, dy), b.translate(dx, dy)) == pytest.approx(iou(a, b), abs=1e-9)


@given(st.floats(0, 1000), st.sampled_from(list(Direction)))
def test_zones_partition_width(cx, direction):
    g = ImageGeometry(1000, 500, direction, 0.2, 0.15)
    z = zone_of(BoundingBox(cx - 1, 0, cx + 1, 1), g)
    from_entry = 1000 - cx if direction is Direction.RIGHT_TO_LEFT else cx
    if from_entry <= 200:
        assert z is Zone.START
    elif from_entry >= 850:
        assert z is Zone.STOP
    else:
        assert z is Zone.MIDDLE


@settings(max_examples=50)
@given(st.lists(boxes(), min_size=1, max_size=6), st.lists(boxes(), min_size=1, max_size=6))
def test_matrices_agree_with_scalar(ta, tb):
    a, b = boxes_to_array(ta), boxes_to_array(tb)
    m = iou_matrix(a, b)
    bm = boundary_matrix(a, b)
    for i, x in enumerate(ta):
        for j, y in enumerate(tb):
            assert m[i, j] == iou(x, y)
            assert bm[i, j] == pytest.approx(boundary_measure(x, y), abs=1e-12)
    assert np.all(iou_matrix(a, a).diagonal() == 1.0)
