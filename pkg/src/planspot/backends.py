"""Detector backends: the seam between the pipeline and whatever predicts.

Two implementations ship:

* :class:`OracleBackend` fabricates predictions from ground truth with
  controlled noise (dropped symbols, jittered boxes, spurious detections),
  which lets the whole pipeline be verified without any trained network.
* :class:`FileBackend` reads per-tile ``.rawpred`` tensors produced by an
  external training environment.

The ``.rawpred`` exchange format is: magic bytes ``RPRD1\\n``, an ASCII
header line ``"grid_h grid_w channels\\n"``, then grid_h*grid_w*channels
32-bit little-endian IEEE-754 floats in row-major order.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass

import numpy as np

from .geometry import BBox, TileFrame, tile_to_plan
from .head import Detection, HeadConfig, encode_best_per_slot
from .tiling import Annotation
from .validation import check_non_negative, check_probability

RAWPRED_MAGIC = b"RPRD1\n"
RAWPRED_SUFFIX = ".rawpred"


class TensorFormatError(ValueError):
    """A .rawpred file violated the exchange format."""


@dataclass(frozen=True)
class OracleConfig:
    drop_prob: float = 0.0
    jitter_sigma: float = 0.0
    score_low: float = 0.6
    score_high: float = 0.95
    false_positive_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        check_probability("drop_prob", self.drop_prob)
        check_non_negative("jitter_sigma", self.jitter_sigma)
        check_non_negative("false_positive_rate", self.false_positive_rate)
        if not (0.0 < self.score_low <= self.score_high < 1.0):
            raise ValueError(
                f"need 0 < score_low <= score_high < 1, got [{self.score_low!r}, {self.score_high!r}]"
            )


def tile_id(image_stem: str, frame: TileFrame) -> str:
    """Deterministic, filesystem-safe identifier for one tile of one image."""
    return f"{image_stem}_x{int(round(frame.x0))}_y{int(round(frame.y0))}"


def _stream_key(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def _symbol_dropped(ann: Annotation, frame: TileFrame | None, ocfg: OracleConfig) -> bool:
    # Keyed on the symbol's plan-space identity, not on the tile, so a
    # dropped symbol is missing from every tile that shows it.
    if ocfg.drop_prob <= 0.0:
        return False
    if ocfg.drop_prob >= 1.0:
        return True
    box = tile_to_plan(ann.box, frame) if frame is not None else ann.box
    key = [
        ocfg.seed & 0xFFFFFFFF,
        ann.class_id,
        int(round(box.x * 8)) & 0xFFFFFFFF,
        int(round(box.y * 8)) & 0xFFFFFFFF,
        int(round(box.w * 8)) & 0xFFFFFFFF,
        int(round(box.h * 8)) & 0xFFFFFFFF,
    ]
    return bool(np.random.default_rng(key).random() < ocfg.drop_prob)


def oracle_predict(
    tile_truth,
    cfg: HeadConfig,
    ocfg: OracleConfig,
    tile_key: str = "",
    frame: TileFrame | None = None,
) -> np.ndarray:
    """Fabricate a raw prediction tensor from one tile's ground truth.

    Per non-ignore symbol: kept with probability 1 - drop_prob, center and
    size perturbed by N(0, jitter_sigma), scored uniformly in
    [score_low, score_high].  Poisson(false_positive_rate) spurious boxes
    are added.  Randomness derives from (seed, tile_key) so tiles can be
    processed in any order.
    """
    net = float(cfg.net_size)
    rng = np.random.default_rng([ocfg.seed & 0xFFFFFFFF, _stream_key(tile_key), 0])
    fabricated: list[Detection] = []
    for ann in tile_truth:
        if ann.ignore or _symbol_dropped(ann, frame, ocfg):
            continue
        cx, cy, w, h = ann.box.cx, ann.box.cy, ann.box.w, ann.box.h
        if ocfg.jitter_sigma > 0:
            dx, dy, dw, dh = rng.normal(0.0, ocfg.jitter_sigma, 4)
            cx, cy = cx + dx, cy + dy
            w, h = max(w + dw, 1.0), max(h + dh, 1.0)
        cx = float(np.clip(cx, 1e-3, net - 1e-3))
        cy = float(np.clip(cy, 1e-3, net - 1e-3))
        score = float(rng.uniform(ocfg.score_low, ocfg.score_high))
        fabricated.append(Detection(ann.class_id, BBox(cx - w / 2, cy - h / 2, w, h), score))

    if ocfg.false_positive_rate > 0:
        rng_fp = np.random.default_rng([ocfg.seed & 0xFFFFFFFF, _stream_key(tile_key), 1])
        for _ in range(int(rng_fp.poisson(ocfg.false_positive_rate))):
            w = float(rng_fp.uniform(8.0, net / 3))
            h = float(rng_fp.uniform(8.0, net / 3))
            cx = float(rng_fp.uniform(1.0, net - 1.0))
            cy = float(rng_fp.uniform(1.0, net - 1.0))
            cls = int(rng_fp.integers(cfg.num_classes))
            score = float(rng_fp.uniform(ocfg.score_low, ocfg.score_high))
            fabricated.append(Detection(cls, BBox(cx - w / 2, cy - h / 2, w, h), score))

    return encode_best_per_slot(fabricated, cfg)


def write_raw(path, raw: np.ndarray) -> None:
    """Write a raw tensor in the .rawpred exchange format."""
    arr = np.asarray(raw)
    if arr.ndim != 3:
        raise TensorFormatError(f"raw tensor must be 3-d, got shape {arr.shape}")
    gh, gw, ch = arr.shape
    with open(path, "wb") as fh:
        fh.write(RAWPRED_MAGIC)
        fh.write(f"{gh} {gw} {ch}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_raw(path, cfg: HeadConfig | None = None) -> np.ndarray:
    """Read a .rawpred tensor, optionally validating its shape against ``cfg``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(RAWPRED_MAGIC))
        if magic != RAWPRED_MAGIC:
            raise TensorFormatError(f"{path}: bad magic {magic!r}, expected {RAWPRED_MAGIC!r}")
        header = fh.readline()
        try:
            gh, gw, ch = (int(tok) for tok in header.split())
        except ValueError as exc:
            raise TensorFormatError(f"{path}: malformed header line {header!r}") from exc
        if min(gh, gw, ch) < 1:
            raise TensorFormatError(f"{path}: non-positive dimensions {gh}x{gw}x{ch}")
        if cfg is not None:
            expected = (cfg.grid_h, cfg.grid_w, cfg.channels)
            if (gh, gw, ch) != expected:
                raise TensorFormatError(
                    f"{path}: tensor is {gh}x{gw}x{ch} but the head expects "
                    f"{expected[0]}x{expected[1]}x{expected[2]}"
                )
        payload = fh.read(4 * gh * gw * ch)
    if len(payload) != 4 * gh * gw * ch:
        raise TensorFormatError(f"{path}: payload truncated ({len(payload)} of {4 * gh * gw * ch} bytes)")
    arr = np.frombuffer(payload, dtype="<f4").reshape(gh, gw, ch)
    if not np.all(np.isfinite(arr)):
        raise TensorFormatError(f"{path}: tensor contains non-finite values")
    return arr.copy()


class OracleBackend:
    """Backend that answers from ground truth under an :class:`OracleConfig`."""

    def __init__(self, head_cfg: HeadConfig, oracle_cfg: OracleConfig | None = None):
        self.head_cfg = head_cfg
        self.oracle_cfg = oracle_cfg or OracleConfig()

    def predict_tile(self, tile_key: str, tile_truth, frame: TileFrame | None = None) -> np.ndarray:
        return oracle_predict(tile_truth, self.head_cfg, self.oracle_cfg, tile_key, frame)


class FileBackend:
    """Backend that reads precomputed tensors from ``<directory>/<tile_id>.rawpred``."""

    def __init__(self, directory, head_cfg: HeadConfig):
        self.directory = str(directory)
        self.head_cfg = head_cfg

    def predict_tile(self, tile_key: str, tile_truth=None, frame: TileFrame | None = None) -> np.ndarray:
        path = os.path.join(self.directory, tile_key + RAWPRED_SUFFIX)
        if not os.path.exists(path):
            raise FileNotFoundError(f"no prediction tensor for tile '{tile_key}' at {path}")
        return read_raw(path, self.head_cfg)
