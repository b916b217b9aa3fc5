"""Overlapping-tile enumeration and training-tile extraction.

A plan is covered by square tiles of side ``round(alpha * net_size)``
whose starts are ``stride`` pixels apart, with a final start clamped to
the right/bottom border so the whole plan is covered without changing the
tile size.  Training tiles keep only windows that fully contain at least
one symbol; symbols clipped by the window border are kept as ignore
regions so they can be masked in the loss and by the metrics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .geometry import BBox, TileFrame, plan_to_tile
from .raster import GrayImage
from .validation import check_positive


@dataclass(frozen=True)
class TilingConfig:
    alpha: float = 1.0
    net_size: int = 227
    stride: int = 50
    pad_value: int = 255

    def __post_init__(self):
        check_positive("alpha", self.alpha)
        if self.net_size < 32:
            raise ValueError(f"net_size must be >= 32, got {self.net_size}")
        if not (1 <= self.stride <= self.alpha * self.net_size):
            raise ValueError(
                f"stride must lie in [1, alpha*net_size] = [1, {self.alpha * self.net_size:g}], got {self.stride}"
            )

    @property
    def side(self) -> int:
        """Tile side in plan pixels."""
        return int(round(self.alpha * self.net_size))


@dataclass(frozen=True)
class Annotation:
    """A class-labeled box, in plan or tile coordinates as the context says."""

    class_id: int
    box: BBox
    class_name: str = ""
    ignore: bool = False

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")


@dataclass(frozen=True)
class AugmentConfig:
    """Which extra training tiles to derive from each kept tile."""

    hflip: bool = False
    vflip: bool = False
    rot90: bool = False
    scale_jitter: float = 0.0  # max relative jitter, e.g. 0.1 for +/-10%

    def __post_init__(self):
        if not (0.0 <= self.scale_jitter < 1.0):
            raise ValueError(f"scale_jitter must lie in [0, 1), got {self.scale_jitter!r}")


@dataclass(frozen=True)
class TrainingTile:
    image: GrayImage
    annotations: tuple[Annotation, ...]
    frame: TileFrame
    tag: str = ""  # augmentation tag, empty for the base tile


def enumerate_tiles(plan_width: int, plan_height: int, cfg: TilingConfig) -> list[TileFrame]:
    """All tile frames covering a plan, row-major by (y0, x0)."""
    if plan_width < 1 or plan_height < 1:
        raise ValueError(f"plan dimensions must be >= 1, got {plan_width}x{plan_height}")
    side = cfg.side

    def starts(extent: int) -> list[int]:
        if extent <= side:
            return [0]
        ss = list(range(0, extent - side + 1, cfg.stride))
        if ss[-1] != extent - side:
            ss.append(extent - side)
        return ss

    return [
        TileFrame(float(x0), float(y0), float(side), float(cfg.net_size))
        for y0 in starts(plan_height)
        for x0 in starts(plan_width)
    ]


def tile_annotations(annotations, frame: TileFrame) -> list[Annotation]:
    """Project plan annotations into one tile's network coordinates.

    Boxes fully contained in the frame keep their ignore flag; boxes that
    only partly overlap it come back with ignore=True.  Disjoint boxes are
    dropped.
    """
    window = frame.box()
    out = []
    for ann in annotations:
        if window.contains_box(ann.box):
            out.append(replace(ann, box=plan_to_tile(ann.box, frame)))
        elif window.intersection_area(ann.box) > 0:
            out.append(replace(ann, box=plan_to_tile(ann.box, frame), ignore=True))
    return out


def _resize_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    ih, iw = arr.shape
    if (out_h, out_w) == (ih, iw):
        return arr.copy()
    ys = (np.arange(out_h) + 0.5) * (ih / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (iw / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, ih - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, iw - 1)
    y1 = np.minimum(y0 + 1, ih - 1)
    x1 = np.minimum(x0 + 1, iw - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    src = arr.astype(np.float64)
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    blended = top * (1 - fy) + bot * fy
    return np.clip(np.rint(blended), 0, 255).astype(np.uint8)


def extract_tile_pixels(plan: GrayImage, frame: TileFrame, pad_value: int = 255) -> GrayImage:
    """Crop a tile from the plan, pad past the border, resize to net_size."""
    side = int(round(frame.side))
    net = int(round(frame.net_size))
    x0, y0 = int(round(frame.x0)), int(round(frame.y0))
    crop = np.full((side, side), pad_value, dtype=np.uint8)
    sx0, sy0 = max(x0, 0), max(y0, 0)
    sx1, sy1 = min(x0 + side, plan.width), min(y0 + side, plan.height)
    if sx0 < sx1 and sy0 < sy1:
        crop[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = plan.pixels[sy0:sy1, sx0:sx1]
    if side == net:
        return GrayImage(crop)
    return GrayImage(_resize_bilinear(crop, net, net))


# --- box transforms matching the augmentation image ops ---------------------


def hflip_box(box: BBox, size: float) -> BBox:
    return BBox(size - box.x - box.w, box.y, box.w, box.h)


def vflip_box(box: BBox, size: float) -> BBox:
    return BBox(box.x, size - box.y - box.h, box.w, box.h)


def rot90_box(box: BBox, size: float, k: int) -> BBox:
    """Box transform matching numpy's counter-clockwise rot90 on a size x size image."""
    out = box
    for _ in range(k % 4):
        out = BBox(out.y, size - out.x - out.w, out.h, out.w)
    return out


def scale_box(box: BBox, factor: float, offset: float) -> BBox:
    return BBox(box.x * factor - offset, box.y * factor - offset, box.w * factor, box.h * factor)


def _rescreen_annotations(anns, net: int) -> tuple[list[Annotation], bool]:
    """Re-apply the containment rule after a transform; True if a positive survives."""
    window = BBox(0.0, 0.0, float(net), float(net))
    kept = []
    any_positive = False
    for ann in anns:
        if window.contains_box(ann.box):
            kept.append(ann)
            any_positive = any_positive or not ann.ignore
        elif window.intersection_area(ann.box) > 0:
            kept.append(replace(ann, ignore=True))
    return kept, any_positive


def _augment_variants(tile: GrayImage, anns, cfg: TilingConfig, augment: AugmentConfig, rng):
    net = cfg.net_size
    size = float(net)
    if augment.hflip:
        flipped = [replace(a, box=hflip_box(a.box, size)) for a in anns]
        yield "h", GrayImage(tile.pixels[:, ::-1]), flipped
    if augment.vflip:
        flipped = [replace(a, box=vflip_box(a.box, size)) for a in anns]
        yield "v", GrayImage(tile.pixels[::-1, :]), flipped
    if augment.rot90:
        k = int(rng.integers(1, 4))
        rotated = [replace(a, box=rot90_box(a.box, size, k)) for a in anns]
        yield f"r{k}", GrayImage(np.rot90(tile.pixels, k)), rotated
    if augment.scale_jitter > 0:
        f = 1.0 + rng.uniform(-augment.scale_jitter, augment.scale_jitter)
        resized_side = max(8, int(round(net * f)))
        f_eff = resized_side / net
        offset = (resized_side - net) // 2
        resized = _resize_bilinear(tile.pixels, resized_side, resized_side)
        canvas = np.full((net, net), cfg.pad_value, dtype=np.uint8)
        if resized_side >= net:
            canvas[:, :] = resized[offset : offset + net, offset : offset + net]
        else:
            start = -offset
            canvas[start : start + resized_side, start : start + resized_side] = resized
        scaled = [replace(a, box=scale_box(a.box, f_eff, float(offset))) for a in anns]
        yield f"s{f_eff:.4f}", GrayImage(canvas), scaled


def extract_training_tiles(
    plan: GrayImage,
    annotations,
    cfg: TilingConfig,
    augment: AugmentConfig | None = None,
    seed: int = 0,
) -> list[TrainingTile]:
    """Extract every tile that fully contains at least one symbol.

    Augmentation, when configured, emits extra transformed tiles after each
    base tile; all random choices come from a generator seeded with ``seed``.
    """
    plan_window = BBox(0.0, 0.0, float(plan.width), float(plan.height))
    annotations = list(annotations)
    for idx, ann in enumerate(annotations):
        if not plan_window.contains_box(ann.box):
            label = ann.class_name or f"class {ann.class_id}"
            raise ValueError(
                f"annotation {idx} ({label}) at ({ann.box.x:g}, {ann.box.y:g}, "
                f"{ann.box.w:g}, {ann.box.h:g}) lies outside the {plan.width}x{plan.height} plan"
            )
        if max(ann.box.w, ann.box.h) >= cfg.side:
            warnings.warn(
                f"annotation {idx} ({ann.box.w:g}x{ann.box.h:g}) does not fit the "
                f"{cfg.side}px tile side; it can never be a training positive",
                stacklevel=2,
            )

    rng = np.random.default_rng(seed)
    tiles: list[TrainingTile] = []
    for frame in enumerate_tiles(plan.width, plan.height, cfg):
        anns_t = tile_annotations(annotations, frame)
        if not any(not a.ignore for a in anns_t):
            continue
        pixels = extract_tile_pixels(plan, frame, cfg.pad_value)
        tiles.append(TrainingTile(pixels, tuple(anns_t), frame))
        if augment is None:
            continue
        for tag, img, moved in _augment_variants(pixels, anns_t, cfg, augment, rng):
            kept, any_positive = _rescreen_annotations(moved, cfg.net_size)
            if any_positive:
                tiles.append(TrainingTile(img, tuple(kept), frame, tag=tag))
    return tiles
