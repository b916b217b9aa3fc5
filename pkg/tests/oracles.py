"""Independent brute-force oracles used to cross-check the fast implementations.

Everything here deliberately avoids the library's own arithmetic: areas are
pixel-membership counts on materialized masks, and clusterings come from
exhaustive partition enumeration.
"""

import numpy as np

from planspot.geometry import BBox


def pixel_iou(a: BBox, b: BBox) -> float:
    """IoU by counting pixel memberships of half-open integer boxes."""
    w = int(max(a.x2, b.x2)) + 1
    h = int(max(a.y2, b.y2)) + 1
    ma = np.zeros((h, w), dtype=bool)
    mb = np.zeros((h, w), dtype=bool)
    ma[int(a.y) : int(a.y2), int(a.x) : int(a.x2)] = True
    mb[int(b.y) : int(b.y2), int(b.x) : int(b.x2)] = True
    inter = int((ma & mb).sum())
    union = int((ma | mb).sum())
    return inter / union


def size_distance(a, b) -> float:
    inter = min(a[0], b[0]) * min(a[1], b[1])
    return 1.0 - inter / (a[0] * a[1] + b[0] * b[1] - inter)


def brute_force_two_clusters(sizes):
    """Optimal 2-clustering by enumerating partitions of the distinct sizes.

    Centroids are multiplicity-weighted means, matching the fitted update
    rule; identical points always share a cluster in an optimal solution.
    Returns (cost, centroids sorted by area).
    """
    distinct = sorted(set(sizes))
    counts = {s: sizes.count(s) for s in distinct}
    best = None
    for mask in range(1, 2 ** len(distinct) - 1):
        groups = ([], [])
        for idx, s in enumerate(distinct):
            groups[(mask >> idx) & 1].append(s)
        cents = []
        for grp in groups:
            total = sum(counts[s] for s in grp)
            cents.append(
                (
                    sum(s[0] * counts[s] for s in grp) / total,
                    sum(s[1] * counts[s] for s in grp) / total,
                )
            )
        cost = sum(counts[s] * min(size_distance(s, c) for c in cents) for s in distinct)
        if best is None or cost < best[0]:
            best = (cost, sorted(cents, key=lambda c: c[0] * c[1]))
    return best


def brute_force_pixel_prf(dets, truths, width, height):
    """Pixel precision/recall by materializing per-class boolean masks."""
    inter = retrieved = relevant = 0
    for cid in {d.class_id for d in dets} | {t.class_id for t in truths}:
        dm = np.zeros((height, width), dtype=bool)
        gm = np.zeros((height, width), dtype=bool)
        for d in dets:
            if d.class_id == cid:
                dm[
                    max(int(d.box.y), 0) : max(int(d.box.y2), 0),
                    max(int(d.box.x), 0) : max(int(d.box.x2), 0),
                ] = True
        for t in truths:
            if t.class_id == cid and not t.ignore:
                gm[int(t.box.y) : int(t.box.y2), int(t.box.x) : int(t.box.x2)] = True
        inter += int((dm & gm).sum())
        retrieved += int(dm.sum())
        relevant += int(gm.sum())
    precision = inter / retrieved if retrieved else 0.0
    recall = inter / relevant if relevant else 0.0
    return precision, recall
