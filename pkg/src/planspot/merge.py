"""Cross-tile duplicate removal.

The same symbol is detected once per tile that shows it, so after mapping
detections to plan space any pair overlapping by more than a fraction of
the smaller box's area is collapsed: the higher-scoring box survives, or
the larger box when the scores are close.  A fixed total order plus
fixpoint iteration makes the outcome deterministic and independent of the
input ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import overlap_fraction_of_smaller
from .head import Detection
from .validation import check_non_negative


@dataclass(frozen=True)
class MergeConfig:
    overlap_threshold: float = 0.10  # fraction of the smaller box's area
    score_tie_epsilon: float = 0.05  # score gap treated as "close"
    per_class: bool = True

    def __post_init__(self):
        if not (0.0 < self.overlap_threshold <= 1.0):
            raise ValueError(f"overlap_threshold must lie in (0, 1], got {self.overlap_threshold!r}")
        check_non_negative("score_tie_epsilon", self.score_tie_epsilon)


def detection_order_key(det: Detection):
    """Total order: score desc, area desc, x asc, y asc, class asc, w asc."""
    return (-det.score, -det.box.area(), det.box.x, det.box.y, det.class_id, det.box.w)


def _merge_group(dets: list[Detection], cfg: MergeConfig) -> list[Detection]:
    items = sorted(dets, key=detection_order_key)
    changed = True
    while changed:
        changed = False
        n = len(items)
        for i in range(n):
            for j in range(i + 1, n):
                if overlap_fraction_of_smaller(items[i].box, items[j].box) <= cfg.overlap_threshold:
                    continue
                if abs(items[i].score - items[j].score) > cfg.score_tie_epsilon:
                    victim = j if items[i].score > items[j].score else i
                else:
                    ai, aj = items[i].box.area(), items[j].box.area()
                    if ai != aj:
                        victim = j if ai > aj else i
                    else:
                        victim = j  # exact area tie: keep the earlier box
                del items[victim]
                changed = True
                break
            if changed:
                break
    return items


def merge_detections(dets, cfg: MergeConfig | None = None) -> list[Detection]:
    """Suppress duplicate detections; survivors are returned unchanged.

    With ``per_class`` set (the default) only same-class pairs suppress
    each other, so legitimately adjacent symbols of different classes
    survive.  Idempotent and permutation-invariant.
    """
    cfg = cfg or MergeConfig()
    dets = list(dets)
    for det in dets:
        if not (0.0 <= det.score <= 1.0):
            raise ValueError(f"detection score {det.score!r} outside [0, 1]")
    if cfg.per_class:
        by_class: dict[int, list[Detection]] = {}
        for det in dets:
            by_class.setdefault(det.class_id, []).append(det)
        survivors: list[Detection] = []
        for cls in sorted(by_class):
            survivors.extend(_merge_group(by_class[cls], cfg))
    else:
        survivors = _merge_group(dets, cfg)
    return sorted(survivors, key=detection_order_key)
