"""Grayscale raster images: container, file I/O, drawing, and degradation.

Images hold 8-bit intensities with white (255) background and black (0)
ink, the usual polarity of scanned or rasterized line drawings.  The
native file format is binary PGM (P5, maxval 255), which round-trips
bit-exactly; PNG files can be read and are converted to grayscale by
luminance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INK_THRESHOLD = 128  # pixels below this count as ink

_PGM_MAGIC = b"P5"
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class GrayImage:
    """Immutable 8-bit grayscale image, pixels indexed [row, col]."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"image pixels must be a non-empty 2-d array, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.uint8).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def blank(cls, width: int, height: int, value: int = 255) -> "GrayImage":
        if width < 1 or height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {width}x{height}")
        return cls(np.full((height, width), value, dtype=np.uint8))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def ink_count(self) -> int:
        return int(np.count_nonzero(self.pixels < INK_THRESHOLD))

    def same_pixels(self, other: "GrayImage") -> bool:
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))


# ---------------------------------------------------------------------------
# File I/O


def save(path, image: GrayImage) -> None:
    """Write ``image`` as binary PGM (P5, maxval 255)."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(image.pixels.tobytes())


def load(path) -> GrayImage:
    """Read a PGM or PNG file as a grayscale image.

    Raises OSError (with the offending path in the message) for missing,
    truncated, or unrecognized files.
    """
    with open(path, "rb") as fh:
        head = fh.read(8)
        fh.seek(0)
        if head[:2] == _PGM_MAGIC:
            return _load_pgm(fh, path)
        if head == _PNG_MAGIC:
            return _load_png(path)
    raise OSError(f"{path}: not a P5 PGM or PNG file")


def _load_pgm(fh, path) -> GrayImage:
    def next_token():
        tok = b""
        while True:
            ch = fh.read(1)
            if ch == b"":
                raise OSError(f"{path}: truncated PGM header")
            if ch == b"#":  # comment runs to end of line
                while ch not in (b"\n", b"", b"\r"):
                    ch = fh.read(1)
                continue
            if ch.isspace():
                if tok:
                    return tok
                continue
            tok += ch

    try:
        magic = next_token()
        if magic != _PGM_MAGIC:
            raise OSError(f"{path}: unsupported PGM magic {magic!r}")
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise OSError(f"{path}: malformed PGM header") from exc
    if width < 1 or height < 1 or maxval != 255:
        raise OSError(f"{path}: unsupported PGM geometry {width}x{height} maxval {maxval}")
    data = fh.read(width * height)
    if len(data) != width * height:
        raise OSError(f"{path}: PGM pixel data truncated ({len(data)} of {width * height} bytes)")
    return GrayImage(np.frombuffer(data, dtype=np.uint8).reshape(height, width))


def _load_png(path) -> GrayImage:
    try:
        from PIL import Image
    except ImportError as exc:  # pillow is an install-time dependency
        raise OSError(f"{path}: PNG support requires the pillow package") from exc
    try:
        with Image.open(path) as img:
            gray = img.convert("L")
            arr = np.asarray(gray, dtype=np.uint8)
    except Exception as exc:
        raise OSError(f"{path}: failed to decode PNG ({exc})") from exc
    return GrayImage(arr)


# ---------------------------------------------------------------------------
# Drawing primitives
#
# All primitives set covered pixels to a constant value (ink by default),
# are clipped to the image bounds, and are therefore idempotent.


def _brush_offsets(width: int):
    if width <= 1:
        return ((0, 0),)
    half = (width - 1) // 2
    rng = range(-half, width - half)
    return tuple((dx, dy) for dy in rng for dx in rng)


def _stamp(arr: np.ndarray, x: int, y: int, offsets, value: int) -> None:
    h, w = arr.shape
    for dx, dy in offsets:
        px, py = x + dx, y + dy
        if 0 <= px < w and 0 <= py < h:
            arr[py, px] = value


def _line_pixels(x0: int, y0: int, x1: int, y1: int):
    # Bresenham walk, endpoints included.
    dx = abs(x1 - x0)
    sx = 1 if x0 < x1 else -1
    dy = -abs(y1 - y0)
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _line_on(arr, x0, y0, x1, y1, width=1, value=0) -> None:
    offsets = _brush_offsets(width)
    for px, py in _line_pixels(int(round(x0)), int(round(y0)), int(round(x1)), int(round(y1))):
        _stamp(arr, px, py, offsets, value)


def _rect_outline_on(arr, x, y, w, h, width=1, value=0) -> None:
    # Concentric one-pixel rings, growing inward for thicker strokes.
    for t in range(width):
        xa, ya = x + t, y + t
        wa, ha = w - 2 * t, h - 2 * t
        if wa < 1 or ha < 1:
            break
        ih, iw = arr.shape
        xs0, xs1 = max(xa, 0), min(xa + wa, iw)
        ys0, ys1 = max(ya, 0), min(ya + ha, ih)
        if xs0 >= xs1 or ys0 >= ys1:
            continue
        if 0 <= ya < ih:
            arr[ya, xs0:xs1] = value
        if 0 <= ya + ha - 1 < ih:
            arr[ya + ha - 1, xs0:xs1] = value
        if 0 <= xa < iw:
            arr[ys0:ys1, xa] = value
        if 0 <= xa + wa - 1 < iw:
            arr[ys0:ys1, xa + wa - 1] = value


def _rect_filled_on(arr, x, y, w, h, value=0) -> None:
    ih, iw = arr.shape
    xs0, xs1 = max(int(x), 0), min(int(x + w), iw)
    ys0, ys1 = max(int(y), 0), min(int(y + h), ih)
    if xs0 < xs1 and ys0 < ys1:
        arr[ys0:ys1, xs0:xs1] = value


def _arc_on(arr, cx, cy, radius, start_angle, end_angle, width=1, value=0) -> None:
    offsets = _brush_offsets(width)
    if radius <= 0:
        _stamp(arr, int(round(cx)), int(round(cy)), offsets, value)
        return
    span = abs(end_angle - start_angle)
    steps = max(8, int(math.ceil(2.0 * radius * span)))
    for k in range(steps + 1):
        theta = start_angle + (end_angle - start_angle) * k / steps
        px = int(round(cx + radius * math.cos(theta)))
        py = int(round(cy + radius * math.sin(theta)))
        _stamp(arr, px, py, offsets, value)


def _mutable(image: GrayImage) -> np.ndarray:
    return image.pixels.copy()


def draw_line(image: GrayImage, x0, y0, x1, y1, width: int = 1) -> GrayImage:
    """Stroke a line segment in ink; returns a new image."""
    arr = _mutable(image)
    _line_on(arr, x0, y0, x1, y1, width=width)
    return GrayImage(arr)


def draw_rect_outline(image: GrayImage, x, y, w, h, width: int = 1) -> GrayImage:
    arr = _mutable(image)
    _rect_outline_on(arr, int(x), int(y), int(w), int(h), width=width)
    return GrayImage(arr)


def draw_rect_filled(image: GrayImage, x, y, w, h, value: int = 0) -> GrayImage:
    arr = _mutable(image)
    _rect_filled_on(arr, x, y, w, h, value=value)
    return GrayImage(arr)


def draw_arc(image: GrayImage, cx, cy, radius, start_angle, end_angle, width: int = 1) -> GrayImage:
    """Stroke a circular arc; angles in radians, full circle = (0, 2*pi)."""
    arr = _mutable(image)
    _arc_on(arr, cx, cy, radius, start_angle, end_angle, width=width)
    return GrayImage(arr)


# ---------------------------------------------------------------------------
# Degradation


def _ink_mask(arr: np.ndarray) -> np.ndarray:
    return arr < INK_THRESHOLD


def _neighborhood_all(mask: np.ndarray) -> np.ndarray:
    # 3x3 erosion; out-of-bounds counts as background.
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    out = np.ones_like(mask)
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            out &= padded[dy : dy + mask.shape[0], dx : dx + mask.shape[1]]
    return out


def _neighborhood_any(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    out = np.zeros_like(mask)
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            out |= padded[dy : dy + mask.shape[0], dx : dx + mask.shape[1]]
    return out


def degrade(image: GrayImage, level: int, seed: int = 0, flip_prob: float = 0.01) -> GrayImage:
    """Apply one of four reproducible degradations.

    Level 0 returns the image unchanged.  Level 1 erodes ink by one pixel
    (thinner lines), level 2 dilates it by one pixel (thicker lines), and
    level 3 flips each pixel independently with probability ``flip_prob``
    using a generator seeded from ``seed``.
    """
    if level not in (0, 1, 2, 3):
        raise ValueError(f"degradation level must be one of 0..3, got {level!r}")
    if level == 0:
        return image
    arr = image.pixels.copy()
    ink = _ink_mask(arr)
    if level == 1:
        survives = _neighborhood_all(ink)
        arr[ink & ~survives] = 255
    elif level == 2:
        grown = _neighborhood_any(ink)
        arr[grown & ~ink] = 0
    else:
        flip_prob = float(flip_prob)
        if not (0.0 <= flip_prob <= 1.0):
            raise ValueError(f"flip_prob must lie in [0, 1], got {flip_prob!r}")
        if flip_prob > 0.0:
            rng = np.random.default_rng(seed)
            flips = rng.random(arr.shape) < flip_prob
            arr[flips] = 255 - arr[flips]
    return GrayImage(arr)
