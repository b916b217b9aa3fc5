"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_probability(name: str, value: float) -> float:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return float(value)


def check_positive(name: str, value: float) -> float:
    if not (value > 0):
        raise ValueError(f"{name} must be > 0, got {value!r}")
    return value


def check_non_negative(name: str, value: float) -> float:
    if not (value >= 0):
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return value


def check_sizes_array(sizes) -> np.ndarray:
    """Coerce a collection of (w, h) pairs to a positive float array of shape (n, 2)."""
    arr = np.asarray(sizes, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, 2) array of sizes, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("sizes must be finite and strictly positive")
    return arr


def check_finite_array(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
