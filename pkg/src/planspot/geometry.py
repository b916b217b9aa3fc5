"""Axis-aligned box arithmetic and the plan/tile coordinate transforms.

Boxes are half-open continuous regions [x, x+w) x [y, y+h) with the origin
at the image top-left, x growing rightward and y growing downward.  Under
this convention the area of an integer-coordinate box equals its pixel
count, so continuous overlap ratios agree exactly with pixel-membership
counts.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle in pixel coordinates."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"degenerate box: w={self.w!r}, h={self.h!r} (both sides must be > 0)")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    def area(self) -> float:
        return self.w * self.h

    def intersection_area(self, other: "BBox") -> float:
        iw = min(self.x2, other.x2) - max(self.x, other.x)
        if iw <= 0:
            return 0.0
        ih = min(self.y2, other.y2) - max(self.y, other.y)
        if ih <= 0:
            return 0.0
        return iw * ih

    def contains_box(self, other: "BBox") -> bool:
        return (
            other.x >= self.x
            and other.y >= self.y
            and other.x2 <= self.x2
            and other.y2 <= self.y2
        )

    def contains_point(self, px: float, py: float) -> bool:
        return self.x <= px < self.x2 and self.y <= py < self.y2


@dataclass(frozen=True)
class TileFrame:
    """Placement of one square tile in plan space.

    ``side`` is the tile edge in plan pixels, ``net_size`` the edge of the
    resized crop handed to the detector; ``side / net_size`` is the scale
    factor between the two coordinate systems.
    """

    x0: float
    y0: float
    side: float
    net_size: float

    def __post_init__(self):
        if self.side <= 0 or self.net_size <= 0:
            raise ValueError(f"tile frame needs positive side and net_size, got {self.side!r}, {self.net_size!r}")

    @property
    def scale(self) -> float:
        return self.side / self.net_size

    def box(self) -> BBox:
        """The tile's footprint in plan space."""
        return BBox(self.x0, self.y0, self.side, self.side)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    if a == b:
        return 1.0
    inter = a.intersection_area(b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area() + b.area() - inter)


def overlap_fraction_of_smaller(a: BBox, b: BBox) -> float:
    """Intersection area as a fraction of the smaller box's area."""
    inter = a.intersection_area(b)
    if inter == 0.0:
        return 0.0
    return inter / min(a.area(), b.area())


def tile_to_plan(box: BBox, frame: TileFrame) -> BBox:
    """Map a box from tile network-input coordinates to plan coordinates.

    Out-of-range boxes pass through; clipping is the caller's choice.
    """
    s = frame.scale
    return BBox(frame.x0 + box.x * s, frame.y0 + box.y * s, box.w * s, box.h * s)


def plan_to_tile(box: BBox, frame: TileFrame) -> BBox:
    """Inverse of :func:`tile_to_plan`."""
    s = frame.scale
    return BBox((box.x - frame.x0) / s, (box.y - frame.y0) / s, box.w / s, box.h / s)
