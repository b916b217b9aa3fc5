"""planspot: spotting small graphical symbols in large raster floor plans.

The package prepares tile datasets from annotated plans, decodes
grid-shaped detector tensors into scored boxes, merges cross-tile
duplicates, and evaluates results with both object-detection AP and
symbol-spotting instance/pixel metrics.  A synthetic plan generator and
an oracle backend make the entire pipeline verifiable offline.
"""

from .anchors import AnchorKMeans, AnchorSet, cluster_anchors, load_anchors, save_anchors
from .backends import (
    FileBackend,
    OracleBackend,
    OracleConfig,
    TensorFormatError,
    oracle_predict,
    read_raw,
    tile_id,
    write_raw,
)
from .geometry import BBox, TileFrame, iou, overlap_fraction_of_smaller, plan_to_tile, tile_to_plan
from .head import (
    Detection,
    HeadConfig,
    LossWeights,
    RawPrediction,
    SlotCollisionError,
    decode,
    encode_detections,
    loss_and_grad,
)
from .manifest import Manifest, load_manifest, save_manifest
from .merge import MergeConfig, merge_detections
from .metrics import (
    EvalReport,
    EvalScene,
    PRF,
    average_precision,
    evaluate,
    instance_prf,
    pixel_prf,
)
from .raster import GrayImage, degrade, draw_arc, draw_line, draw_rect_filled, draw_rect_outline, load, save
from .spotter import SymbolSpotter
from .synth import SYMBOL_CLASSES, GenerationError, PlanSpec, generate_plan
from .tiling import (
    Annotation,
    AugmentConfig,
    TilingConfig,
    TrainingTile,
    enumerate_tiles,
    extract_training_tiles,
    tile_annotations,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorKMeans",
    "AnchorSet",
    "Annotation",
    "AugmentConfig",
    "BBox",
    "Detection",
    "EvalReport",
    "EvalScene",
    "FileBackend",
    "GenerationError",
    "GrayImage",
    "HeadConfig",
    "LossWeights",
    "Manifest",
    "MergeConfig",
    "OracleBackend",
    "OracleConfig",
    "PRF",
    "PlanSpec",
    "RawPrediction",
    "SYMBOL_CLASSES",
    "SlotCollisionError",
    "SymbolSpotter",
    "TensorFormatError",
    "TileFrame",
    "TilingConfig",
    "TrainingTile",
    "average_precision",
    "cluster_anchors",
    "decode",
    "degrade",
    "draw_arc",
    "draw_line",
    "draw_rect_filled",
    "draw_rect_outline",
    "encode_detections",
    "enumerate_tiles",
    "evaluate",
    "extract_training_tiles",
    "generate_plan",
    "instance_prf",
    "iou",
    "load",
    "load_anchors",
    "load_manifest",
    "loss_and_grad",
    "merge_detections",
    "oracle_predict",
    "overlap_fraction_of_smaller",
    "pixel_prf",
    "plan_to_tile",
    "read_raw",
    "save",
    "save_anchors",
    "save_manifest",
    "tile_annotations",
    "tile_id",
    "tile_to_plan",
    "write_raw",
]
