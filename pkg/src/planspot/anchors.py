"""Prior anchor sizes via k-means clustering under an IoU distance.

Symbol (w, h) pairs are clustered with d(box, center) = 1 - IoU of the two
sizes laid over a common center, the standard way of picking detector
priors so that the distance ignores absolute position and favors shape
agreement over raw pixel differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .validation import check_sizes_array


@dataclass(frozen=True)
class AnchorSet:
    """Prior sizes in network-input pixels, ordered by area ascending."""

    priors: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.priors) < 1:
            raise ValueError("anchor set needs at least one prior")
        priors = tuple((float(w), float(h)) for w, h in self.priors)
        if any(w <= 0 or h <= 0 for w, h in priors):
            raise ValueError("anchor sizes must be strictly positive")
        priors = tuple(sorted(priors, key=lambda p: (p[0] * p[1], p[0])))
        object.__setattr__(self, "priors", priors)

    def __len__(self) -> int:
        return len(self.priors)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.priors, dtype=float)


def size_iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of centered sizes; a is (n, 2), b is (k, 2), result (n, k)."""
    inter = np.minimum(a[:, None, 0], b[None, :, 0]) * np.minimum(a[:, None, 1], b[None, :, 1])
    areas_a = (a[:, 0] * a[:, 1])[:, None]
    areas_b = (b[:, 0] * b[:, 1])[None, :]
    return inter / (areas_a + areas_b - inter)


def _kmeanspp_init(candidates: np.ndarray, k: int, rng) -> np.ndarray:
    centers = [candidates[rng.integers(len(candidates))]]
    while len(centers) < k:
        d = 1.0 - size_iou_matrix(candidates, np.asarray(centers))
        nearest = d.min(axis=1)
        weights = nearest**2
        total = weights.sum()
        if total <= 0:
            # all candidates coincide with a center; cannot happen when
            # k <= number of distinct candidates
            raise ValueError("k-means++ ran out of distinct candidates")
        centers.append(candidates[rng.choice(len(candidates), p=weights / total)])
    return np.asarray(centers, dtype=float)


def _fit_iou_kmeans(X: np.ndarray, k: int, seed: int, max_iters: int):
    """Lloyd iterations with a guarded mean update.

    The mean is not the exact minimizer of summed 1-IoU distance, so each
    cluster keeps its previous center whenever the mean would increase that
    cluster's summed distance; this makes the distortion sequence
    non-increasing by construction.
    """
    # Canonical point order makes the whole fit independent of input order.
    order = np.lexsort((X[:, 1], X[:, 0]))
    Xs = X[order]
    candidates = np.unique(Xs, axis=0)
    if k > len(candidates):
        raise ValueError(f"k={k} exceeds the {len(candidates)} distinct sizes")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(candidates, k, rng)

    labels = None
    history: list[float] = []
    for _ in range(max_iters):
        d = 1.0 - size_iou_matrix(Xs, centers)
        new_labels = d.argmin(axis=1)
        history.append(float(d[np.arange(len(Xs)), new_labels].mean()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = Xs[labels == c]
            if len(members) == 0:
                continue
            proposal = members.mean(axis=0)
            old_cost = (1.0 - size_iou_matrix(members, centers[c : c + 1])[:, 0]).sum()
            new_cost = (1.0 - size_iou_matrix(members, proposal[None, :])[:, 0]).sum()
            if new_cost <= old_cost:
                centers[c] = proposal
    return centers, history


def cluster_anchors(sizes, k: int, seed: int = 0, max_iters: int = 100) -> AnchorSet:
    """Cluster symbol sizes into ``k`` anchor priors; deterministic per seed."""
    X = check_sizes_array(sizes)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    centers, _ = _fit_iou_kmeans(X, k, seed, max_iters)
    return AnchorSet(tuple((float(w), float(h)) for w, h in centers))


class AnchorKMeans(BaseEstimator, ClusterMixin):
    """Scikit-learn style estimator around :func:`cluster_anchors`.

    Attributes after ``fit``: ``cluster_centers_`` (k, 2 array, area
    ascending), ``anchors_`` (AnchorSet), ``labels_``, ``n_iter_`` and
    ``distortion_history_`` (mean 1-IoU after each assignment pass).
    """

    def __init__(self, n_anchors: int = 10, max_iter: int = 100, random_state: int = 0):
        self.n_anchors = n_anchors
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_sizes_array(X)
        if self.n_anchors < 1:
            raise ValueError(f"n_anchors must be >= 1, got {self.n_anchors}")
        centers, history = _fit_iou_kmeans(X, self.n_anchors, self.random_state, self.max_iter)
        anchors = AnchorSet(tuple((float(w), float(h)) for w, h in centers))
        self.anchors_ = anchors
        self.cluster_centers_ = anchors.as_array()
        self.distortion_history_ = history
        self.n_iter_ = len(history)
        self.labels_ = self.predict(X)
        return self

    def predict(self, X) -> np.ndarray:
        X = check_sizes_array(X)
        d = 1.0 - size_iou_matrix(X, self.cluster_centers_)
        return d.argmin(axis=1)


def save_anchors(path, anchors: AnchorSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([[w, h] for w, h in anchors.priors], fh, indent=2)
        fh.write("\n")


def load_anchors(path) -> AnchorSet:
    with open(path, "r", encoding="utf-8") as fh:
        pairs = json.load(fh)
    if not isinstance(pairs, list):
        raise ValueError(f"{path}: anchor file must hold a JSON list of [w, h] pairs")
    return AnchorSet(tuple((float(w), float(h)) for w, h in pairs))
