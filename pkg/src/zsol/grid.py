"""Dense 2-D grid and embedding primitives.

Density maps are plain H x W numpy arrays (float32 storage, float64 math);
point sets carry (x, y) pixel coordinates plus optional per-point
confidences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .validation import (
    check_density_map,
    check_odd_window,
    check_points,
    check_positive,
    check_vector,
)

NORM_EPS = 1e-12


@dataclass
class PointSet:
    """Object center points in pixel coordinates, optionally with confidences."""

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.float64))
    confidences: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = check_points(self.points)
        if self.confidences is not None:
            conf = np.asarray(self.confidences, dtype=np.float64).reshape(-1)
            if conf.shape[0] != self.points.shape[0]:
                raise ValueError("confidences must match the number of points")
            if not np.all(np.isfinite(conf)) or np.any(conf < 0):
                raise ValueError("confidences must be finite and >= 0")
            self.confidences = conf

    def __len__(self):
        return self.points.shape[0]


def cosine_similarity(a, b):
    """Cosine similarity of two equal-dimension vectors.

    Returns 0.0 when either norm is below 1e-12 so degenerate inputs never
    propagate NaNs. Identical inputs short-circuit to exactly 1.0.
    """
    a = check_vector(a, "a")
    b = check_vector(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if np.array_equal(a, b):
        na = float(np.linalg.norm(a))
        return 0.0 if na < NORM_EPS else 1.0
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < NORM_EPS or nb < NORM_EPS:
        return 0.0
    # clip: rounding can push |cos| a few ulp past 1
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def max_pool(d, window):
    """Sliding k x k maximum with the window clamped at the borders.

    Output has the same shape as the input; each output pixel is the max of
    the input over the (clamped) k x k neighborhood centered there.
    """
    k = check_odd_window(window)
    arr = check_density_map(d, allow_negative=True)
    # 'nearest' padding replicates edge values, which for a running max is
    # identical to clamping the window to the valid region
    pooled = ndimage.maximum_filter(arr, size=k, mode="nearest")
    return np.asarray(pooled, dtype=np.float32)


def _resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """1-D bilinear resampling matrix (align-corners-false, edges clamped)."""
    scale = n_in / n_out
    x_src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    i0 = np.floor(x_src).astype(np.int64)
    w = x_src - i0
    i1 = np.clip(i0 + 1, 0, n_in - 1)
    i0 = np.clip(i0, 0, n_in - 1)
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    np.add.at(mat, (rows, i0), 1.0 - w)
    np.add.at(mat, (rows, i1), w)
    return mat


def resample_bilinear(d, out_height, out_width):
    """Resample a 2-D grid to an arbitrary size (align-corners-false)."""
    arr = check_density_map(d, allow_negative=True)
    if out_height < 1 or out_width < 1:
        raise ValueError("output dims must be >= 1")
    r = _resample_matrix(arr.shape[0], int(out_height))
    c = _resample_matrix(arr.shape[1], int(out_width))
    return r @ arr @ c.T


def resample_bilinear_adjoint(grad_out, in_height, in_width):
    """Adjoint of :func:`resample_bilinear`: pulls an output-space gradient
    back to the input grid."""
    g = np.asarray(grad_out, dtype=np.float64)
    r = _resample_matrix(int(in_height), g.shape[0])
    c = _resample_matrix(int(in_width), g.shape[1])
    return r.T @ g @ c


def bilinear_upsample(d, factor):
    """Upsample a density grid by an integer factor with bilinear sampling.

    Values are interpolated (mass is not preserved); factor 1 is the
    identity.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    arr = check_density_map(d, allow_negative=True)
    if factor == 1:
        return np.asarray(arr, dtype=np.float32)
    out = resample_bilinear(arr, arr.shape[0] * factor, arr.shape[1] * factor)
    return np.asarray(out, dtype=np.float32)


def gaussian_splat(points, height, width, sigma=2.0):
    """Rasterize points into a density map of unit-mass Gaussians.

    Each point contributes an isotropic Gaussian (1 / (2 pi sigma^2) peak
    normalization) truncated at 4 sigma, so the map mass approximates the
    point count. Contributions are accumulated in point order at 64-bit.
    """
    sigma = check_positive(sigma, "sigma")
    height = int(height)
    width = int(width)
    if height < 1 or width < 1:
        raise ValueError("map dims must be >= 1")
    if isinstance(points, PointSet):
        pts = points.points
    else:
        pts = check_points(points)
    if pts.shape[0] and (
        np.any(pts[:, 0] < 0)
        or np.any(pts[:, 0] >= width)
        or np.any(pts[:, 1] < 0)
        or np.any(pts[:, 1] >= height)
    ):
        raise ValueError("point outside map bounds")

    out = np.zeros((height, width), dtype=np.float64)
    radius = 4.0 * sigma
    norm = 1.0 / (2.0 * np.pi * sigma * sigma)
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    for x, y in pts:
        x0 = max(0, int(np.ceil(x - radius)))
        x1 = min(width - 1, int(np.floor(x + radius)))
        y0 = max(0, int(np.ceil(y - radius)))
        y1 = min(height - 1, int(np.floor(y + radius)))
        if x1 < x0 or y1 < y0:
            continue
        xs = np.arange(x0, x1 + 1, dtype=np.float64) - x
        ys = np.arange(y0, y1 + 1, dtype=np.float64) - y
        dist2 = ys[:, None] ** 2 + xs[None, :] ** 2
        kernel = norm * np.exp(-dist2 * inv2s2)
        kernel[dist2 > radius * radius] = 0.0
        out[y0 : y1 + 1, x0 : x1 + 1] += kernel
    return np.asarray(out, dtype=np.float32)
