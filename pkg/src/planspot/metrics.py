"""Detection quality metrics: average precision plus the spotting-community
instance-wise and pixel-wise precision/recall/F-score.

Average precision follows the all-point interpolation (area under the
monotonically decreasing precision envelope over recall); the summary
``mean_ap`` averages AP over the IoU thresholds 0.50:0.05:0.95 and over
classes.  Instance-wise metrics count a detection positive on any overlap
with a same-class truth; pixel-wise metrics compare retrieved and relevant
box-pixel sets, computed exactly with a rectangle-union sweep rather than
materialized masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import BBox, iou
from .head import Detection
from .merge import detection_order_key
from .tiling import Annotation

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


class PRF(NamedTuple):
    precision: float
    recall: float
    f_score: float


def _prf(precision: float, recall: float) -> PRF:
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return PRF(precision, recall, f)


@dataclass(frozen=True)
class ClassAP:
    ap50: float
    ap75: float
    mean_ap: float


@dataclass(frozen=True)
class EvalScene:
    """One image's merged detections and ground truth."""

    detections: tuple[Detection, ...]
    truths: tuple[Annotation, ...]
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        object.__setattr__(self, "truths", tuple(self.truths))


@dataclass
class EvalReport:
    per_class: dict[int, ClassAP]
    ap50: float
    ap75: float
    mean_ap: float
    instance: PRF
    pixel: PRF
    class_names: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_class": {
                str(cid): {
                    "name": self.class_names[cid] if cid < len(self.class_names) else str(cid),
                    "ap50": c.ap50,
                    "ap75": c.ap75,
                    "map": c.mean_ap,
                }
                for cid, c in sorted(self.per_class.items())
            },
            "aggregate": {"ap50": self.ap50, "ap75": self.ap75, "map": self.mean_ap},
            "instance": self.instance._asdict(),
            "pixel": self.pixel._asdict(),
        }

    def to_table(self) -> str:
        name_w = max([len("Symbol")] + [len(n) for n in self.class_names]) + 2
        lines = [f"{'Symbol':<{name_w}}{'AP50':>8}{'AP75':>8}"]
        for cid in sorted(self.per_class):
            name = self.class_names[cid] if cid < len(self.class_names) else str(cid)
            c = self.per_class[cid]
            lines.append(f"{name:<{name_w}}{100 * c.ap50:>8.2f}{100 * c.ap75:>8.2f}")
        lines.append(f"{'AP':<{name_w}}{100 * self.ap50:>8.2f}{100 * self.ap75:>8.2f}")
        lines.append(f"{'mAP':<{name_w}}{100 * self.mean_ap:>8.2f}")
        lines.append("")
        lines.append(f"{'Eval.':<{name_w}}{'P':>8}{'R':>8}{'F':>8}")
        for label, prf in (("Instance", self.instance), ("Pixel", self.pixel)):
            lines.append(
                f"{label:<{name_w}}{100 * prf.precision:>8.2f}{100 * prf.recall:>8.2f}{100 * prf.f_score:>8.2f}"
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Average precision


def _match_scenes(scenes, class_id: int, iou_threshold: float):
    """Greedy per-scene matching; returns pooled (sort_keys, tp_flags, n_truth)."""
    keys, flags = [], []
    n_truth = 0
    for scene_idx, scene in enumerate(scenes):
        gts = [t for t in scene.truths if t.class_id == class_id and not t.ignore]
        n_truth += len(gts)
        dets = sorted(
            (d for d in scene.detections if d.class_id == class_id),
            key=detection_order_key,
        )
        taken = [False] * len(gts)
        for rank, det in enumerate(dets):
            best, best_iou = -1, 0.0
            for gi, gt in enumerate(gts):
                if taken[gi]:
                    continue
                v = iou(det.box, gt.box)
                if v > best_iou:
                    best, best_iou = gi, v
            hit = best >= 0 and best_iou >= iou_threshold
            if hit:
                taken[best] = True
            keys.append((-det.score, scene_idx, rank))
            flags.append(hit)
    return keys, flags, n_truth


def _ap_from_matches(keys, flags, n_truth: int) -> float:
    if n_truth == 0:
        return 1.0 if not flags else 0.0
    if not flags:
        return 0.0
    order = sorted(range(len(keys)), key=keys.__getitem__)
    tp = np.cumsum([1.0 if flags[i] else 0.0 for i in order])
    fp = np.cumsum([0.0 if flags[i] else 1.0 for i in order])
    recall = tp / n_truth
    precision = tp / (tp + fp)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    return float(np.sum((mrec[1:] - mrec[:-1]) * mpre[1:]))


def average_precision(dets, truths, class_id: int, iou_threshold: float, num_classes: int | None = None) -> float:
    """AP of one class on one scene at a fixed IoU threshold.

    Conventions: 1.0 when there is neither truth nor detection for the
    class, 0.0 when truths exist but nothing was detected (and vice versa).
    """
    if class_id < 0 or (num_classes is not None and class_id >= num_classes):
        raise ValueError(f"unknown class_id {class_id}")
    scene = EvalScene(tuple(dets), tuple(truths), 0, 0)
    return _ap_from_matches(*_match_scenes([scene], class_id, iou_threshold))


# ---------------------------------------------------------------------------
# Instance-wise metrics


def _instance_counts(scenes, class_ids):
    tp = n_det = recalled = n_truth = 0
    for scene in scenes:
        for cid in class_ids:
            dets = [d for d in scene.detections if d.class_id == cid]
            gts = [t for t in scene.truths if t.class_id == cid and not t.ignore]
            n_det += len(dets)
            n_truth += len(gts)
            for d in dets:
                if any(d.box.intersection_area(t.box) > 0 for t in gts):
                    tp += 1
            for t in gts:
                if any(d.box.intersection_area(t.box) > 0 for d in dets):
                    recalled += 1
    return tp, n_det, recalled, n_truth


def _instance_prf_from_counts(tp, n_det, recalled, n_truth) -> PRF:
    if n_det == 0 and n_truth == 0:
        return PRF(1.0, 1.0, 1.0)
    precision = tp / n_det if n_det else 0.0
    recall = recalled / n_truth if n_truth else 0.0
    return _prf(precision, recall)


def instance_prf(dets, truths) -> PRF:
    """Spotting metrics where any same-class overlap counts as a positive."""
    dets, truths = list(dets), list(truths)
    cids = sorted({d.class_id for d in dets} | {t.class_id for t in truths})
    scene = EvalScene(tuple(dets), tuple(truths), 0, 0)
    return _instance_prf_from_counts(*_instance_counts([scene], cids))


# ---------------------------------------------------------------------------
# Pixel-wise metrics


def _clip_rect(box: BBox, width: float, height: float):
    x0, y0 = max(box.x, 0.0), max(box.y, 0.0)
    x1, y1 = min(box.x2, width), min(box.y2, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1, y1)


def union_area(rects) -> float:
    """Exact area of a union of axis-aligned rectangles (x0, y0, x1, y1),
    by coordinate compression."""
    rects = [r for r in rects if r is not None and r[2] > r[0] and r[3] > r[1]]
    if not rects:
        return 0.0
    xs = np.unique(np.array([r[0] for r in rects] + [r[2] for r in rects]))
    ys = np.unique(np.array([r[1] for r in rects] + [r[3] for r in rects]))
    covered = np.zeros((len(xs) - 1, len(ys) - 1), dtype=bool)
    for x0, y0, x1, y1 in rects:
        i0, i1 = np.searchsorted(xs, x0), np.searchsorted(xs, x1)
        j0, j1 = np.searchsorted(ys, y0), np.searchsorted(ys, y1)
        covered[i0:i1, j0:j1] = True
    dx = np.diff(xs)
    dy = np.diff(ys)
    return float((covered * np.outer(dx, dy)).sum())


def _pixel_areas(scenes, class_ids):
    retrieved = relevant = common = 0.0
    for scene in scenes:
        w, h = float(scene.width), float(scene.height)
        for cid in class_ids:
            det_rects = [
                _clip_rect(d.box, w, h) for d in scene.detections if d.class_id == cid
            ]
            gt_rects = [
                _clip_rect(t.box, w, h)
                for t in scene.truths
                if t.class_id == cid and not t.ignore
            ]
            det_rects = [r for r in det_rects if r]
            gt_rects = [r for r in gt_rects if r]
            retrieved += union_area(det_rects)
            relevant += union_area(gt_rects)
            inter_rects = []
            for dr in det_rects:
                for gr in gt_rects:
                    x0, y0 = max(dr[0], gr[0]), max(dr[1], gr[1])
                    x1, y1 = min(dr[2], gr[2]), min(dr[3], gr[3])
                    if x1 > x0 and y1 > y0:
                        inter_rects.append((x0, y0, x1, y1))
            common += union_area(inter_rects)
    return common, retrieved, relevant


def _pixel_prf_from_areas(common, retrieved, relevant) -> PRF:
    if retrieved == 0.0 and relevant == 0.0:
        return PRF(1.0, 1.0, 1.0)
    precision = common / retrieved if retrieved > 0 else 0.0
    recall = common / relevant if relevant > 0 else 0.0
    return _prf(precision, recall)


def pixel_prf(dets, truths, plan_width: int, plan_height: int) -> PRF:
    """Retrieved vs relevant box-pixel sets, micro-aggregated across classes."""
    dets, truths = list(dets), list(truths)
    cids = sorted({d.class_id for d in dets} | {t.class_id for t in truths})
    scene = EvalScene(tuple(dets), tuple(truths), plan_width, plan_height)
    return _pixel_prf_from_areas(*_pixel_areas([scene], cids))


# ---------------------------------------------------------------------------
# Full report


def evaluate(scenes, class_names) -> EvalReport:
    """Score a corpus of scenes against its ground truth.

    AP pools detections per class across scenes (matching stays within a
    scene); instance and pixel metrics micro-aggregate across classes and
    scenes.  Aggregate AP values are macro means over all listed classes.
    """
    scenes = list(scenes)
    class_names = list(class_names)
    num_classes = len(class_names)
    for scene in scenes:
        for obj in list(scene.detections) + list(scene.truths):
            if obj.class_id >= num_classes:
                raise ValueError(f"class_id {obj.class_id} out of range for {num_classes} classes")

    per_class: dict[int, ClassAP] = {}
    for cid in range(num_classes):
        aps = {}
        for thr in IOU_THRESHOLDS:
            aps[thr] = _ap_from_matches(*_match_scenes(scenes, cid, thr))
        per_class[cid] = ClassAP(
            ap50=aps[IOU_THRESHOLDS[0]],
            ap75=aps[IOU_THRESHOLDS[5]],
            mean_ap=float(np.mean(list(aps.values()))),
        )

    cids = list(range(num_classes))
    instance = _instance_prf_from_counts(*_instance_counts(scenes, cids))
    pixel = _pixel_prf_from_areas(*_pixel_areas(scenes, cids))
    return EvalReport(
        per_class=per_class,
        ap50=float(np.mean([c.ap50 for c in per_class.values()])),
        ap75=float(np.mean([c.ap75 for c in per_class.values()])),
        mean_ap=float(np.mean([c.mean_ap for c in per_class.values()])),
        instance=instance,
        pixel=pixel,
        class_names=class_names,
    )
