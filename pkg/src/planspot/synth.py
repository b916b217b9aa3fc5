"""Seeded generator of synthetic floor plans with exact ground truth.

Plans are built from an outer wall, a recursive binary room partition,
door arcs on shared walls, and per-room symbols drawn from a small
parametric library (line/arc/rectangle primitives only).  Symbol boxes are
rejection-sampled so they never overlap, every placement is recorded as an
exact annotation, and the whole construction is a pure function of the
spec, so corpora regenerate bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BBox
from .raster import (
    GrayImage,
    _arc_on,
    _line_on,
    _rect_filled_on,
    _rect_outline_on,
    degrade,
)
from .tiling import Annotation

MIN_ROOM_SIDE = 120
WALL_STROKE = 3
SYMBOL_CLEARANCE = 2  # minimum gap between symbol boxes, pixels


class GenerationError(RuntimeError):
    """Symbol placement failed; the plan is too crowded for the request."""


# (class name, (w_min, w_max), (h_min, h_max), may swap orientation)
_LIBRARY_SPECS = (
    ("door", (40, 56), (40, 56), False),
    ("bathtub", (64, 112), (36, 60), True),
    ("toilet", (30, 44), (44, 64), False),
    ("sink", (32, 56), (32, 56), False),
    ("window", (48, 104), (12, 16), True),
    ("stove", (48, 76), (48, 76), False),
    ("fridge", (48, 72), (56, 88), False),
    ("sofa", (80, 144), (44, 72), True),
)

SYMBOL_CLASSES = tuple(name for name, _, _, _ in _LIBRARY_SPECS)
_CLASS_IDS = {name: i for i, name in enumerate(SYMBOL_CLASSES)}


@dataclass(frozen=True)
class PlanSpec:
    width: int = 768
    height: int = 768
    seed: int = 0
    room_split_depth: int = 3
    symbol_density: tuple[int, int] = (1, 3)
    class_set: tuple[str, ...] = SYMBOL_CLASSES
    noise_level: int = 0
    noise_flip_prob: float = 0.01

    def __post_init__(self):
        if self.width < 512 or self.height < 512:
            raise ValueError(f"plans must be at least 512x512, got {self.width}x{self.height}")
        lo, hi = self.symbol_density
        if lo < 0 or hi < lo:
            raise ValueError(f"symbol_density must be (lo, hi) with 0 <= lo <= hi, got {self.symbol_density}")
        if not self.class_set:
            raise ValueError("class_set must not be empty")
        unknown = [c for c in self.class_set if c not in _CLASS_IDS]
        if unknown:
            raise ValueError(f"unknown symbol classes {unknown}; library has {list(SYMBOL_CLASSES)}")
        if self.noise_level not in (0, 1, 2, 3):
            raise ValueError(f"noise_level must be one of 0..3, got {self.noise_level}")


@dataclass
class _Wall:
    axis: str  # "v" or "h"
    pos: int
    lo: int
    hi: int


# ---------------------------------------------------------------------------
# Symbol drawing (all shapes stay inside their box)


def _draw_bathtub(arr, x, y, w, h):
    _rect_outline_on(arr, x, y, w, h)
    _rect_outline_on(arr, x + 3, y + 3, w - 6, h - 6)
    if w >= h:
        _arc_on(arr, x + 7, y + h // 2, 2, 0.0, 2 * np.pi)
    else:
        _arc_on(arr, x + w // 2, y + 7, 2, 0.0, 2 * np.pi)


def _draw_toilet(arr, x, y, w, h):
    tank_h = max(6, h // 4)
    _rect_outline_on(arr, x, y, w, tank_h)
    r = max(3, min(w // 2 - 1, (h - tank_h) // 2 - 1))
    cy = y + tank_h + (h - tank_h) // 2
    _arc_on(arr, x + w // 2, cy, r, 0.0, 2 * np.pi)
    _line_on(arr, x + w // 2, y + tank_h, x + w // 2, cy - r)


def _draw_sink(arr, x, y, w, h):
    _rect_outline_on(arr, x, y, w, h)
    _arc_on(arr, x + w // 2, y + h // 2, max(3, min(w, h) // 3), 0.0, 2 * np.pi)
    _line_on(arr, x + w // 2, y + 1, x + w // 2, y + max(2, h // 5))


def _draw_window(arr, x, y, w, h):
    if w >= h:
        _line_on(arr, x, y + h // 3, x + w - 1, y + h // 3)
        _line_on(arr, x, y + 2 * h // 3, x + w - 1, y + 2 * h // 3)
        _line_on(arr, x, y, x, y + h - 1)
        _line_on(arr, x + w - 1, y, x + w - 1, y + h - 1)
    else:
        _line_on(arr, x + w // 3, y, x + w // 3, y + h - 1)
        _line_on(arr, x + 2 * w // 3, y, x + 2 * w // 3, y + h - 1)
        _line_on(arr, x, y, x + w - 1, y)
        _line_on(arr, x, y + h - 1, x + w - 1, y + h - 1)


def _draw_stove(arr, x, y, w, h):
    _rect_outline_on(arr, x, y, w, h)
    r = max(2, min(w, h) // 8)
    for fx in (x + w // 4, x + 3 * w // 4):
        for fy in (y + h // 4, y + 3 * h // 4):
            _arc_on(arr, fx, fy, r, 0.0, 2 * np.pi)


def _draw_fridge(arr, x, y, w, h):
    _rect_outline_on(arr, x, y, w, h)
    _line_on(arr, x, y + h // 3, x + w - 1, y + h // 3)
    _line_on(arr, x + w - 4, y + 3, x + w - 4, y + h // 3 - 2)


def _draw_sofa(arr, x, y, w, h):
    _rect_outline_on(arr, x, y, w, h)
    _line_on(arr, x + 2, y + h // 4, x + w - 3, y + h // 4)
    _line_on(arr, x + w // 8, y + h // 4, x + w // 8, y + h - 2)
    _line_on(arr, x + w - 1 - w // 8, y + h // 4, x + w - 1 - w // 8, y + h - 2)


_ROOM_DRAWERS = {
    "bathtub": _draw_bathtub,
    "toilet": _draw_toilet,
    "sink": _draw_sink,
    "window": _draw_window,
    "stove": _draw_stove,
    "fridge": _draw_fridge,
    "sofa": _draw_sofa,
}


def _draw_door(arr, x: int, y: int, d: int, orientation: str):
    """Quarter-arc door glyph inside the box (x, y, d, d).

    orientation: which side of its wall the box sits on ("right"/"left"
    of a vertical wall, "below"/"above" a horizontal one).
    """
    r = d - 1
    if orientation == "right":
        _line_on(arr, x, y, x + r, y)
        _arc_on(arr, x, y, r, 0.0, np.pi / 2)
    elif orientation == "left":
        _line_on(arr, x, y, x + r, y)
        _arc_on(arr, x + r, y, r, np.pi / 2, np.pi)
    elif orientation == "below":
        _line_on(arr, x, y, x, y + r)
        _arc_on(arr, x, y, r, 0.0, np.pi / 2)
    else:  # above
        _line_on(arr, x, y, x, y + r)
        _arc_on(arr, x, y + r, r, -np.pi / 2, 0.0)


# ---------------------------------------------------------------------------
# Layout


def _split_rooms(rng, x, y, w, h, depth, walls):
    can_v = w >= 2 * MIN_ROOM_SIDE + WALL_STROKE
    can_h = h >= 2 * MIN_ROOM_SIDE + WALL_STROKE
    if depth == 0 or not (can_v or can_h):
        return [(x, y, w, h)]
    if can_v and (not can_h or w >= h):
        pos = int(rng.integers(x + MIN_ROOM_SIDE + 1, x + w - MIN_ROOM_SIDE - WALL_STROKE + 2))
        walls.append(_Wall("v", pos, y, y + h))
        left = _split_rooms(rng, x, y, pos - 1 - x, h, depth - 1, walls)
        right = _split_rooms(rng, pos + WALL_STROKE - 1, y, x + w - (pos + WALL_STROKE - 1), h, depth - 1, walls)
        return left + right
    pos = int(rng.integers(y + MIN_ROOM_SIDE + 1, y + h - MIN_ROOM_SIDE - WALL_STROKE + 2))
    walls.append(_Wall("h", pos, x, x + w))
    top = _split_rooms(rng, x, y, w, pos - 1 - y, depth - 1, walls)
    bottom = _split_rooms(rng, x, pos + WALL_STROKE - 1, w, y + h - (pos + WALL_STROKE - 1), depth - 1, walls)
    return top + bottom


def _boxes_clear(box: BBox, placed, clearance: float = SYMBOL_CLEARANCE) -> bool:
    padded = BBox(box.x - clearance, box.y - clearance, box.w + 2 * clearance, box.h + 2 * clearance)
    return all(padded.intersection_area(other.box) == 0.0 for other in placed)


def _place_door(rng, arr, wall: _Wall, annotations) -> None:
    span = wall.hi - wall.lo
    d = int(rng.integers(40, 57))
    if span < d + 16:
        return
    for _ in range(100):
        t = int(rng.integers(wall.lo + 8, wall.hi - d - 8 + 1))
        flip = bool(rng.random() < 0.5)
        if wall.axis == "v":
            bx = wall.pos + 2 if not flip else wall.pos - 1 - d
            box = BBox(float(bx), float(t), float(d), float(d))
            orientation = "right" if not flip else "left"
        else:
            by = wall.pos + 2 if not flip else wall.pos - 1 - d
            box = BBox(float(t), float(by), float(d), float(d))
            orientation = "below" if not flip else "above"
        if not _boxes_clear(box, annotations):
            continue
        bx0, by0 = int(box.x), int(box.y)
        if not np.all(arr[by0 : by0 + d, bx0 : bx0 + d] == 255):
            continue  # a crossing wall runs through the candidate box
        if wall.axis == "v":
            _rect_filled_on(arr, wall.pos - 1, t, WALL_STROKE, d, value=255)
        else:
            _rect_filled_on(arr, t, wall.pos - 1, d, WALL_STROKE, value=255)
        _draw_door(arr, int(box.x), int(box.y), d, orientation)
        annotations.append(Annotation(_CLASS_IDS["door"], box, "door"))
        return


def _place_room_symbols(rng, arr, room, spec: PlanSpec, annotations) -> None:
    rx, ry, rw, rh = room
    inner_x, inner_y = rx + 6, ry + 6
    inner_w, inner_h = rw - 12, rh - 12
    room_classes = [c for c in spec.class_set if c != "door"]
    if not room_classes or inner_w < 16 or inner_h < 16:
        return
    lo, hi = spec.symbol_density
    count = int(rng.integers(lo, hi + 1)) if hi > lo else lo
    for k in range(count):
        placed = False
        for _attempt in range(1000):
            name = room_classes[int(rng.integers(len(room_classes)))]
            _, (wmin, wmax), (hmin, hmax), swap = _LIBRARY_SPECS[_CLASS_IDS[name]]
            if swap and rng.random() < 0.5:
                (wmin, wmax), (hmin, hmax) = (hmin, hmax), (wmin, wmax)
            if wmin > inner_w or hmin > inner_h:
                continue
            sw = int(rng.integers(wmin, min(wmax, inner_w) + 1))
            sh = int(rng.integers(hmin, min(hmax, inner_h) + 1))
            px = int(rng.integers(inner_x, inner_x + inner_w - sw + 1))
            py = int(rng.integers(inner_y, inner_y + inner_h - sh + 1))
            box = BBox(float(px), float(py), float(sw), float(sh))
            if not _boxes_clear(box, annotations):
                continue
            _ROOM_DRAWERS[name](arr, px, py, sw, sh)
            annotations.append(Annotation(_CLASS_IDS[name], box, name))
            placed = True
            break
        if not placed:
            # The upper density bound is best effort; only the lower bound
            # is a hard requirement.
            if k < lo:
                raise GenerationError(
                    "could not place a symbol after 1000 attempts; "
                    "lower symbol_density or enlarge the plan"
                )
            break


def generate_plan(spec: PlanSpec) -> tuple[GrayImage, list[Annotation]]:
    """Draw one synthetic plan and return it with its exact annotations."""
    rng = np.random.default_rng(spec.seed)
    arr = np.full((spec.height, spec.width), 255, dtype=np.uint8)

    margin = 20
    _rect_outline_on(arr, margin, margin, spec.width - 2 * margin, spec.height - 2 * margin, width=WALL_STROKE)
    ix, iy = margin + WALL_STROKE, margin + WALL_STROKE
    iw = spec.width - 2 * (margin + WALL_STROKE)
    ih = spec.height - 2 * (margin + WALL_STROKE)

    walls: list[_Wall] = []
    rooms = _split_rooms(rng, ix, iy, iw, ih, spec.room_split_depth, walls)
    for wall in walls:
        if wall.axis == "v":
            _rect_filled_on(arr, wall.pos - 1, wall.lo, WALL_STROKE, wall.hi - wall.lo)
        else:
            _rect_filled_on(arr, wall.lo, wall.pos - 1, wall.hi - wall.lo, WALL_STROKE)

    annotations: list[Annotation] = []
    for wall in walls:
        _place_door(rng, arr, wall, annotations)
    for room in rooms:
        _place_room_symbols(rng, arr, room, spec, annotations)

    image = GrayImage(arr)
    if spec.noise_level != 0:
        image = degrade(image, spec.noise_level, seed=spec.seed, flip_prob=spec.noise_flip_prob)
    return image, annotations
