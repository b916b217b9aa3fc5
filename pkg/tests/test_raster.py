import math

import numpy as np
import pytest

from planspot.raster import (
    GrayImage,
    degrade,
    draw_arc,
    draw_line,
    draw_rect_filled,
    draw_rect_outline,
    load,
    save,
)


def test_pgm_round_trip(tmp_path):
    img = GrayImage(np.array([[0, 255], [128, 64]], dtype=np.uint8))
    path = tmp_path / "t.pgm"
    save(path, img)
    assert load(path).same_pixels(img)


def test_pgm_one_pixel(tmp_path):
    path = tmp_path / "one.pgm"
    save(path, GrayImage.blank(1, 1))
    assert path.stat().st_size == len(b"P5\n1 1\n255\n") + 1
    assert load(path).pixels[0, 0] == 255


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load(tmp_path / "absent.pgm")


def test_load_truncated_pgm(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P5\n10 10\n255\nshort")
    with pytest.raises(OSError, match="truncated"):
        load(path)


def test_load_unknown_format(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"GIF89a notselling")
    with pytest.raises(OSError):
        load(path)


def test_pgm_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# comment line\n2 1\n255\n\x00\xff")
    img = load(path)
    assert img.width == 2 and img.height == 1
    assert list(img.pixels[0]) == [0, 255]


def test_png_read_grayscale_and_rgb(tmp_path):
    PIL = pytest.importorskip("PIL.Image")
    gray = PIL.new("L", (3, 2), 200)
    gray_path = tmp_path / "g.png"
    gray.save(gray_path)
    img = load(gray_path)
    assert (img.width, img.height) == (3, 2)
    assert int(img.pixels[0, 0]) == 200

    rgb = PIL.new("RGB", (2, 2), (255, 0, 0))
    rgb_path = tmp_path / "c.png"
    rgb.save(rgb_path)
    img = load(rgb_path)
    assert int(img.pixels[0, 0]) == 76  # ITU-R 601 luminance of pure red


def test_image_validation():
    with pytest.raises(ValueError):
        GrayImage(np.zeros((0, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        GrayImage.blank(0, 5)


def test_image_is_immutable():
    img = GrayImage.blank(4, 4)
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 0


def test_line_pixel_count():
    out = draw_line(GrayImage.blank(10, 10), 0, 5, 9, 5)
    assert out.ink_count() == 10


def test_rect_outline_pixel_count():
    out = draw_rect_outline(GrayImage.blank(10, 10), 1, 1, 8, 8)
    assert out.ink_count() == 4 * 8 - 4


def test_zero_radius_arc_single_pixel():
    out = draw_arc(GrayImage.blank(9, 9), 4, 4, 0, 0.0, 2 * math.pi)
    assert out.ink_count() == 1
    assert out.pixels[4, 4] == 0


def test_filled_rect_and_erase():
    filled = draw_rect_filled(GrayImage.blank(8, 8), 2, 2, 4, 4)
    assert filled.ink_count() == 16
    erased = draw_rect_filled(filled, 3, 3, 2, 2, value=255)
    assert erased.ink_count() == 12


def test_drawing_clipped_to_bounds():
    out = draw_line(GrayImage.blank(5, 5), -10, 2, 20, 2, width=3)
    assert out.ink_count() > 0
    out2 = draw_arc(GrayImage.blank(5, 5), 2, 2, 40, 0.0, 2 * math.pi)
    assert out2.ink_count() == 0  # whole arc lies outside


def test_drawing_idempotent():
    base = GrayImage.blank(20, 20)
    once = draw_arc(draw_rect_outline(draw_line(base, 1, 1, 15, 9, 2), 3, 3, 10, 10), 10, 10, 6, 0, math.pi)
    twice = draw_arc(draw_rect_outline(draw_line(once, 1, 1, 15, 9, 2), 3, 3, 10, 10), 10, 10, 6, 0, math.pi)
    assert twice.same_pixels(once)


def _random_doodle(seed):
    rng = np.random.default_rng(seed)
    img = GrayImage.blank(60, 60)
    for _ in range(6):
        x0, y0, x1, y1 = rng.integers(0, 60, 4)
        img = draw_line(img, x0, y0, x1, y1, width=int(rng.integers(1, 4)))
    return img


def test_degrade_level0_identity():
    img = _random_doodle(0)
    assert degrade(img, 0) is img


@pytest.mark.parametrize("seed", range(8))
def test_degrade_monotone_ink(seed):
    img = _random_doodle(seed)
    assert degrade(img, 1, seed=seed).ink_count() <= img.ink_count()
    assert degrade(img, 2, seed=seed).ink_count() >= img.ink_count()


def test_degrade_level2_grows_line():
    line = draw_line(GrayImage.blank(10, 10), 0, 5, 9, 5)
    assert degrade(line, 2).ink_count() > 10


def test_degrade_level3():
    img = _random_doodle(3)
    assert degrade(img, 3, seed=1, flip_prob=0.0).same_pixels(img)
    a = degrade(img, 3, seed=9, flip_prob=0.2)
    b = degrade(img, 3, seed=9, flip_prob=0.2)
    assert a.same_pixels(b)
    assert not a.same_pixels(img)


def test_degrade_invalid_level():
    with pytest.raises(ValueError):
        degrade(GrayImage.blank(4, 4), 5)
