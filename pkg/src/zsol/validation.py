"""Input validation helpers shared across the package.

All public entry points funnel array inputs through these checks so that
shape/finiteness errors surface with a clear message instead of deep inside
numpy broadcasting.
"""

from __future__ import annotations

import numpy as np


def check_vector(v, name="vector", dim=None):
    """Coerce to a 1-D float64 array and verify finiteness."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise ValueError(f"{name} must have at least one element")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} must have dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_embedding_matrix(m, name="embeddings", rows=None, dim=None):
    """Coerce to a 2-D float64 matrix (N rows of D-dim embeddings)."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (N x D), got shape {arr.shape}")
    n, d = arr.shape
    if n < 1 or d < 1:
        raise ValueError(f"{name} must be at least 1x1, got {arr.shape}")
    if rows is not None and n != rows:
        raise ValueError(f"{name} must have {rows} rows, got {n}")
    if dim is not None and d != dim:
        raise ValueError(f"{name} must have dimension {dim}, got {d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_density_map(d, name="density map", allow_negative=False):
    """Validate an H x W density grid: 2-D, finite, nonnegative.

    Returns the array as float64 for internal math; callers convert back to
    float32 for storage.
    """
    arr = np.asarray(d, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (H x W), got shape {arr.shape}")
    h, w = arr.shape
    if h < 1 or w < 1:
        raise ValueError(f"{name} must be at least 1x1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if not allow_negative and np.any(arr < 0):
        raise ValueError(f"{name} contains negative values")
    return arr


def check_points(pts, name="points", height=None, width=None):
    """Coerce a point list to an (N, 2) float64 array of (x, y) pixel coords."""
    arr = np.asarray(pts, dtype=np.float64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (N, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    if width is not None and (np.any(arr[:, 0] < 0) or np.any(arr[:, 0] >= width)):
        raise ValueError(f"{name}: x coordinates out of [0, {width})")
    if height is not None and (np.any(arr[:, 1] < 0) or np.any(arr[:, 1] >= height)):
        raise ValueError(f"{name}: y coordinates out of [0, {height})")
    return arr


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return float(value)


def check_odd_window(k, name="window"):
    k = int(k)
    if k < 1 or k % 2 == 0:
        raise ValueError(f"{name} must be an odd integer >= 1, got {k}")
    return k
