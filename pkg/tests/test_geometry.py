import numpy as np
import pytest

from oracles import pixel_iou
from planspot.geometry import (
    BBox,
    TileFrame,
    iou,
    overlap_fraction_of_smaller,
    plan_to_tile,
    tile_to_plan,
)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (BBox(0, 0, 10, 10), BBox(0, 0, 10, 10), 1.0),
        (BBox(0, 0, 10, 10), BBox(20, 20, 5, 5), 0.0),
        (BBox(0, 0, 10, 10), BBox(5, 0, 10, 10), 50 / 150),
    ],
)
def test_iou_examples(a, b, expected):
    assert iou(a, b) == pytest.approx(expected, abs=1e-12)
    assert iou(b, a) == iou(a, b)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (BBox(0, 0, 10, 10), BBox(2, 2, 4, 4), 1.0),
        (BBox(0, 0, 10, 10), BBox(9, 9, 10, 10), 0.01),
        (BBox(0, 0, 10, 10), BBox(20, 0, 10, 10), 0.0),
    ],
)
def test_overlap_fraction_examples(a, b, expected):
    assert overlap_fraction_of_smaller(a, b) == pytest.approx(expected, abs=1e-12)
    assert overlap_fraction_of_smaller(b, a) == overlap_fraction_of_smaller(a, b)


@pytest.mark.parametrize("w, h", [(0, 10), (10, 0), (-3, 5), (5, -1), (float("nan"), 5)])
def test_degenerate_box_rejected(w, h):
    with pytest.raises(ValueError):
        BBox(0, 0, w, h)


def test_tile_to_plan_translation_only():
    frame = TileFrame(100, 200, 227, 227)
    out = tile_to_plan(BBox(0, 0, 227, 227), frame)
    assert (out.x, out.y, out.w, out.h) == (100, 200, 227, 227)


def test_tile_to_plan_scale_two():
    frame = TileFrame(0, 0, 200, 100)
    out = tile_to_plan(BBox(10, 10, 20, 20), frame)
    assert (out.x, out.y, out.w, out.h) == (20, 20, 40, 40)


def test_round_trip_identity():
    rng = np.random.default_rng(11)
    for _ in range(100):
        frame = TileFrame(
            rng.uniform(0, 4000), rng.uniform(0, 4000), rng.uniform(64, 900), rng.uniform(64, 300)
        )
        box = BBox(rng.uniform(-50, 500), rng.uniform(-50, 500), rng.uniform(1, 300), rng.uniform(1, 300))
        back = tile_to_plan(plan_to_tile(box, frame), frame)
        for attr in ("x", "y", "w", "h"):
            assert abs(getattr(back, attr) - getattr(box, attr)) < 1e-9


def test_iou_matches_pixel_count_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        x1, y1, x2, y2 = rng.integers(0, 40, 4)
        w1, h1, w2, h2 = rng.integers(1, 30, 4)
        a = BBox(float(x1), float(y1), float(w1), float(h1))
        b = BBox(float(x2), float(y2), float(w2), float(h2))
        assert iou(a, b) == pixel_iou(a, b)


def test_iou_properties():
    rng = np.random.default_rng(5)
    for _ in range(300):
        a = BBox(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0.1, 40), rng.uniform(0.1, 40))
        b = BBox(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0.1, 40), rng.uniform(0.1, 40))
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert iou(a, a) == 1.0
        assert overlap_fraction_of_smaller(a, b) >= v


def test_frame_validation():
    with pytest.raises(ValueError):
        TileFrame(0, 0, 0, 227)
    with pytest.raises(ValueError):
        TileFrame(0, 0, 227, -1)
