"""End-to-end spotting pipeline as a scikit-learn style estimator.

``SymbolSpotter.predict`` enumerates overlapping tiles over a plan, asks
the configured backend for one raw tensor per tile, decodes each tensor
into scored boxes, maps tile boxes back to plan coordinates, and merges
cross-tile duplicates.  The backend seam makes the pipeline detector
agnostic: an oracle for verification, tensor files for a trained network.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from sklearn.base import BaseEstimator

from .backends import tile_id
from .geometry import TileFrame, tile_to_plan
from .head import Detection, decode
from .merge import MergeConfig, detection_order_key, merge_detections
from .raster import GrayImage
from .tiling import TilingConfig, enumerate_tiles, tile_annotations


def _plan_dims(plan) -> tuple[int, int]:
    if isinstance(plan, GrayImage):
        return plan.width, plan.height
    width, height = plan
    return int(width), int(height)


class SymbolSpotter(BaseEstimator):
    """Tile, predict, decode, and merge detections over a whole plan.

    Parameters
    ----------
    backend : object with ``predict_tile(tile_key, tile_truth, frame)`` and
        a ``head_cfg`` attribute, e.g. :class:`planspot.backends.OracleBackend`
        or :class:`planspot.backends.FileBackend`.
    tiling : TilingConfig, tile geometry (defaults apply when None).
    merge : MergeConfig, duplicate-removal settings.
    score_threshold : minimum decoded score to keep a detection.
    n_jobs : tiles processed concurrently; results are gathered in tile
        order, so the output never depends on scheduling.
    """

    def __init__(
        self,
        backend=None,
        tiling: TilingConfig | None = None,
        merge: MergeConfig | None = None,
        score_threshold: float = 0.25,
        n_jobs: int = 1,
    ):
        self.backend = backend
        self.tiling = tiling
        self.merge = merge
        self.score_threshold = score_threshold
        self.n_jobs = n_jobs

    def _settings(self):
        if self.backend is None:
            raise ValueError("SymbolSpotter needs a backend")
        if not (0.0 < self.score_threshold < 1.0):
            raise ValueError(f"score_threshold must lie in (0, 1), got {self.score_threshold!r}")
        return self.tiling or TilingConfig(), self.merge or MergeConfig()

    def _tile_detections(self, frame: TileFrame, truths, image_id: str, class_names) -> list[Detection]:
        key = tile_id(image_id, frame)
        tile_truth = tile_annotations(truths, frame)
        raw = self.backend.predict_tile(key, tile_truth, frame)
        out = []
        for det in decode(raw, self.backend.head_cfg, self.score_threshold):
            name = class_names[det.class_id] if det.class_id < len(class_names) else ""
            out.append(Detection(det.class_id, tile_to_plan(det.box, frame), det.score, name))
        return out

    def detect_tiles(self, plan, annotations=None, image_id: str = "plan", class_names=()) -> list[Detection]:
        """Per-tile detections mapped to plan space, before duplicate removal."""
        tiling, _ = self._settings()
        width, height = _plan_dims(plan)
        truths = list(annotations or [])
        frames = enumerate_tiles(width, height, tiling)
        if self.n_jobs and self.n_jobs > 1:
            with ThreadPoolExecutor(max_workers=self.n_jobs) as pool:
                futures = [
                    pool.submit(self._tile_detections, frame, truths, image_id, class_names)
                    for frame in frames
                ]
                per_tile = [f.result() for f in futures]
        else:
            per_tile = [self._tile_detections(frame, truths, image_id, class_names) for frame in frames]
        dets = [det for tile_dets in per_tile for det in tile_dets]
        return sorted(dets, key=detection_order_key)

    def predict(self, plan, annotations=None, image_id: str = "plan", class_names=()) -> list[Detection]:
        """Merged plan-space detections for one plan.

        ``annotations`` (plan-space ground truth) is required by the oracle
        backend and ignored by the file backend.
        """
        _, merge_cfg = self._settings()
        return merge_detections(
            self.detect_tiles(plan, annotations, image_id, class_names), merge_cfg
        )
