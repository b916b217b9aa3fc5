"""Grid prediction head: tensor layout, decoding, encoding, and the loss.

A detector emits one tensor of shape [grid_h, grid_w, A*(5+C)] per tile.
Each cell holds A anchor slots laid out as (tx, ty, tw, th, to, c_1..c_C).
The box transform is the usual grid-relative one:

    center_x = (sigmoid(tx) + col) * net_size / grid_w
    center_y = (sigmoid(ty) + row) * net_size / grid_h
    w, h     = prior_w * exp(tw), prior_h * exp(th)
    score    = sigmoid(to) * max(softmax(c))

``encode_detections`` is the exact right-inverse of ``decode`` and powers
the oracle backend; ``loss_and_grad`` returns the training loss together
with its analytic derivative with respect to every tensor entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorSet, size_iou_matrix
from .geometry import BBox
from .tiling import Annotation
from .validation import check_finite_array

# One raw tensor per tile, shaped [grid_h, grid_w, A*(5+C)].
RawPrediction = np.ndarray

# Logit written to the true class channel by encode; softmax of the
# resulting one-hot row is 1 within ~(C-1)*exp(-30).
CLASS_LOGIT_MARGIN = 30.0
# Objectness logit for empty slots; sigmoid(-20) ~ 2e-9.
EMPTY_OBJECTNESS_LOGIT = -20.0


class SlotCollisionError(ValueError):
    """Two detections claimed the same (cell, anchor) slot."""


@dataclass(frozen=True)
class HeadConfig:
    anchors: AnchorSet
    num_classes: int
    grid_h: int = 7
    grid_w: int = 7
    net_size: int = 227

    def __post_init__(self):
        if self.grid_h < 1 or self.grid_w < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.grid_h}x{self.grid_w}")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.net_size < 1:
            raise ValueError(f"net_size must be >= 1, got {self.net_size}")

    @property
    def num_anchors(self) -> int:
        return len(self.anchors)

    @property
    def channels(self) -> int:
        return self.num_anchors * (5 + self.num_classes)

    @property
    def cell_w(self) -> float:
        return self.net_size / self.grid_w

    @property
    def cell_h(self) -> float:
        return self.net_size / self.grid_h


@dataclass(frozen=True)
class Detection:
    """A scored, class-labeled box (tile or plan space as labeled)."""

    class_id: int
    box: BBox
    score: float
    class_name: str = ""

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must lie in [0, 1], got {self.score!r}")


@dataclass(frozen=True)
class LossWeights:
    lambda_coord: float = 5.0
    lambda_noobj: float = 0.5
    noobj_iou: float = 0.6  # predictions overlapping truth at least this much skip the no-object term


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _softmax(x, axis=-1):
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def check_raw(raw: np.ndarray, cfg: HeadConfig) -> np.ndarray:
    """Validate a raw prediction tensor against the head layout."""
    arr = np.asarray(raw, dtype=np.float64)
    expected = (cfg.grid_h, cfg.grid_w, cfg.channels)
    if arr.shape != expected:
        raise ValueError(f"raw prediction shape {arr.shape} does not match head layout {expected}")
    check_finite_array("raw prediction", arr)
    return arr


def slot_index(det: Detection, cfg: HeadConfig) -> tuple[int, int, int]:
    """(row, col, anchor) slot a detection encodes into: the cell holding its
    center and the prior with highest IoU to its size."""
    box = det.box
    if not (0.0 <= box.cx < cfg.net_size and 0.0 <= box.cy < cfg.net_size):
        raise ValueError(
            f"detection center ({box.cx:g}, {box.cy:g}) outside the [0, {cfg.net_size}) network square"
        )
    col = min(int(box.cx / cfg.cell_w), cfg.grid_w - 1)
    row = min(int(box.cy / cfg.cell_h), cfg.grid_h - 1)
    ious = size_iou_matrix(np.array([[box.w, box.h]]), cfg.anchors.as_array())[0]
    return row, col, int(ious.argmax())


def decode(raw: np.ndarray, cfg: HeadConfig, score_threshold: float = 0.25) -> list[Detection]:
    """Turn a raw tensor into scored detections in network coordinates.

    Emits every anchor slot whose score reaches ``score_threshold``, in
    row-major (cell, anchor) order.
    """
    arr = check_raw(raw, cfg)
    A, C = cfg.num_anchors, cfg.num_classes
    t = arr.reshape(cfg.grid_h, cfg.grid_w, A, 5 + C)

    cols = np.arange(cfg.grid_w, dtype=float)[None, :, None]
    rows = np.arange(cfg.grid_h, dtype=float)[:, None, None]
    cx = (_sigmoid(t[..., 0]) + cols) * cfg.cell_w
    cy = (_sigmoid(t[..., 1]) + rows) * cfg.cell_h
    priors = cfg.anchors.as_array()
    w = priors[:, 0][None, None, :] * np.exp(t[..., 2])
    h = priors[:, 1][None, None, :] * np.exp(t[..., 3])
    obj = _sigmoid(t[..., 4])
    probs = _softmax(t[..., 5:], axis=-1)
    best_prob = probs.max(axis=-1)
    cls = probs.argmax(axis=-1)
    score = obj * best_prob

    out = []
    for i, j, a in np.argwhere(score >= score_threshold):
        box = BBox(cx[i, j, a] - w[i, j, a] / 2, cy[i, j, a] - h[i, j, a] / 2, w[i, j, a], h[i, j, a])
        out.append(Detection(int(cls[i, j, a]), box, float(score[i, j, a])))
    return out


def _encode_slots(dets, cfg: HeadConfig, keep_higher_score: bool) -> dict[tuple[int, int, int], Detection]:
    slots: dict[tuple[int, int, int], Detection] = {}
    for det in dets:
        if not (0.0 < det.score < 1.0):
            raise ValueError(f"encodable scores must lie strictly in (0, 1), got {det.score!r}")
        key = slot_index(det, cfg)
        if key in slots:
            if not keep_higher_score:
                raise SlotCollisionError(
                    f"two detections claim cell (row {key[0]}, col {key[1]}) anchor {key[2]}"
                )
            if det.score > slots[key].score:
                slots[key] = det
        else:
            slots[key] = det
    return slots


def _write_slot(t: np.ndarray, key, det: Detection, cfg: HeadConfig) -> None:
    row, col, a = key
    eps = 1e-12
    fx = np.clip(det.box.cx / cfg.cell_w - col, eps, 1.0 - eps)
    fy = np.clip(det.box.cy / cfg.cell_h - row, eps, 1.0 - eps)
    pw, ph = cfg.anchors.priors[a]
    t[row, col, a, 0] = _logit(fx)
    t[row, col, a, 1] = _logit(fy)
    t[row, col, a, 2] = np.log(det.box.w / pw)
    t[row, col, a, 3] = np.log(det.box.h / ph)
    t[row, col, a, 4] = _logit(det.score)
    t[row, col, a, 5:] = 0.0
    if det.class_id >= cfg.num_classes:
        raise ValueError(f"class_id {det.class_id} out of range for {cfg.num_classes} classes")
    t[row, col, a, 5 + det.class_id] = CLASS_LOGIT_MARGIN


def encode_detections(dets, cfg: HeadConfig) -> np.ndarray:
    """Exact right-inverse of :func:`decode`.

    Unclaimed slots receive an objectness logit of -20 so they decode to
    nothing at any practical threshold.  Two detections landing on the
    same slot raise :class:`SlotCollisionError`.
    """
    A, C = cfg.num_anchors, cfg.num_classes
    t = np.zeros((cfg.grid_h, cfg.grid_w, A, 5 + C), dtype=np.float64)
    t[..., 4] = EMPTY_OBJECTNESS_LOGIT
    for key, det in _encode_slots(dets, cfg, keep_higher_score=False).items():
        _write_slot(t, key, det, cfg)
    return t.reshape(cfg.grid_h, cfg.grid_w, cfg.channels)


def encode_best_per_slot(dets, cfg: HeadConfig) -> np.ndarray:
    """Like :func:`encode_detections` but slot collisions keep the higher score."""
    A, C = cfg.num_anchors, cfg.num_classes
    t = np.zeros((cfg.grid_h, cfg.grid_w, A, 5 + C), dtype=np.float64)
    t[..., 4] = EMPTY_OBJECTNESS_LOGIT
    for key, det in _encode_slots(dets, cfg, keep_higher_score=True).items():
        _write_slot(t, key, det, cfg)
    return t.reshape(cfg.grid_h, cfg.grid_w, cfg.channels)


def _decoded_boxes(t: np.ndarray, cfg: HeadConfig):
    """Corner-form boxes (x, y, x2, y2) for every slot, vectorized."""
    cols = np.arange(cfg.grid_w, dtype=float)[None, :, None]
    rows = np.arange(cfg.grid_h, dtype=float)[:, None, None]
    cx = (_sigmoid(t[..., 0]) + cols) * cfg.cell_w
    cy = (_sigmoid(t[..., 1]) + rows) * cfg.cell_h
    priors = cfg.anchors.as_array()
    w = priors[:, 0][None, None, :] * np.exp(t[..., 2])
    h = priors[:, 1][None, None, :] * np.exp(t[..., 3])
    return cx, cy, w, h


def _iou_grid_vs_box(cx, cy, w, h, box: BBox) -> np.ndarray:
    x1 = cx - w / 2
    y1 = cy - h / 2
    x2 = cx + w / 2
    y2 = cy + h / 2
    iw = np.minimum(x2, box.x2) - np.maximum(x1, box.x)
    ih = np.minimum(y2, box.y2) - np.maximum(y1, box.y)
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = w * h + box.area() - inter
    return inter / union


def loss_and_grad(
    raw: np.ndarray,
    truths,
    cfg: HeadConfig,
    weights: LossWeights | None = None,
) -> tuple[float, np.ndarray]:
    """Training loss over one tile and its exact gradient.

    For each ground-truth box the slot (cell holding its center, prior
    with best size IoU) is responsible; the loss sums

    * lambda_coord * squared offset/log-size residuals on responsible slots,
    * squared (sigmoid(to) - 1) on responsible slots,
    * lambda_noobj * sigmoid(to)^2 on background slots, skipping slots whose
      decoded box overlaps any truth with IoU >= noobj_iou or whose center
      falls in an ignore region,
    * cross-entropy between softmax class probabilities and the true class.

    Returns (loss, gradient) with the gradient shaped like ``raw``.
    """
    w = weights or LossWeights()
    arr = check_raw(raw, cfg)
    A, C = cfg.num_anchors, cfg.num_classes
    t = arr.reshape(cfg.grid_h, cfg.grid_w, A, 5 + C)
    grad = np.zeros_like(t)

    positives = [a for a in truths if not a.ignore]
    ignores = [a for a in truths if a.ignore]
    for ann in positives:
        box = ann.box
        if not (0.0 <= box.cx < cfg.net_size and 0.0 <= box.cy < cfg.net_size):
            raise ValueError(
                f"truth center ({box.cx:g}, {box.cy:g}) outside the [0, {cfg.net_size}) tile"
            )

    # Responsibility assignment; a later truth overwrites a contested slot.
    responsible: dict[tuple[int, int, int], Annotation] = {}
    prior_arr = cfg.anchors.as_array()
    for ann in positives:
        col = min(int(ann.box.cx / cfg.cell_w), cfg.grid_w - 1)
        row = min(int(ann.box.cy / cfg.cell_h), cfg.grid_h - 1)
        a = int(size_iou_matrix(np.array([[ann.box.w, ann.box.h]]), prior_arr)[0].argmax())
        responsible[(row, col, a)] = ann

    cx, cy, bw, bh = _decoded_boxes(t, cfg)
    best_iou = np.zeros((cfg.grid_h, cfg.grid_w, A))
    for ann in positives:
        best_iou = np.maximum(best_iou, _iou_grid_vs_box(cx, cy, bw, bh, ann.box))
    in_ignore = np.zeros((cfg.grid_h, cfg.grid_w, A), dtype=bool)
    for ann in ignores:
        in_ignore |= (
            (cx >= ann.box.x) & (cx < ann.box.x2) & (cy >= ann.box.y) & (cy < ann.box.y2)
        )

    resp_mask = np.zeros((cfg.grid_h, cfg.grid_w, A), dtype=bool)
    for key in responsible:
        resp_mask[key] = True
    noobj_mask = ~resp_mask & (best_iou < w.noobj_iou) & ~in_ignore

    loss = 0.0
    sig_to = _sigmoid(t[..., 4])
    dsig_to = sig_to * (1.0 - sig_to)

    # No-object confidence term.
    loss += w.lambda_noobj * float((sig_to[noobj_mask] ** 2).sum())
    grad[..., 4] += np.where(noobj_mask, w.lambda_noobj * 2.0 * sig_to * dsig_to, 0.0)

    for (row, col, a), ann in responsible.items():
        pw, ph = cfg.anchors.priors[a]
        tx, ty, tw_, th_ = t[row, col, a, :4]
        sx, sy = _sigmoid(tx), _sigmoid(ty)
        target_fx = ann.box.cx / cfg.cell_w - col
        target_fy = ann.box.cy / cfg.cell_h - row
        target_tw = np.log(ann.box.w / pw)
        target_th = np.log(ann.box.h / ph)

        loss += w.lambda_coord * float(
            (sx - target_fx) ** 2 + (sy - target_fy) ** 2 + (tw_ - target_tw) ** 2 + (th_ - target_th) ** 2
        )
        grad[row, col, a, 0] += w.lambda_coord * 2.0 * (sx - target_fx) * sx * (1.0 - sx)
        grad[row, col, a, 1] += w.lambda_coord * 2.0 * (sy - target_fy) * sy * (1.0 - sy)
        grad[row, col, a, 2] += w.lambda_coord * 2.0 * (tw_ - target_tw)
        grad[row, col, a, 3] += w.lambda_coord * 2.0 * (th_ - target_th)

        so = sig_to[row, col, a]
        loss += float((so - 1.0) ** 2)
        grad[row, col, a, 4] += 2.0 * (so - 1.0) * so * (1.0 - so)

        probs = _softmax(t[row, col, a, 5:])
        if ann.class_id >= C:
            raise ValueError(f"truth class_id {ann.class_id} out of range for {C} classes")
        loss += float(-np.log(probs[ann.class_id]))
        dce = probs.copy()
        dce[ann.class_id] -= 1.0
        grad[row, col, a, 5:] += dce

    return loss, grad.reshape(arr.shape)
