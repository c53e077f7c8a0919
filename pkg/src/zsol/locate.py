"""Density-map decoding and sliding-window inference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .align import ProjectionModel, predict_density
from .data import ImageSample
from .errors import DataError
from .grid import PointSet, max_pool
from .validation import check_density_map, check_odd_window, check_positive

WINDOW_SIZE = 384
WINDOW_STRIDE = 128

DENSE_ALPHA = 5.0 / 255.0
SPARSE_ALPHA = 10.0 / 255.0


@dataclass
class DecodeConfig:
    """Thresholds for peak extraction.

    ``regime`` picks the neighborhood-activity threshold alpha: crowded maps
    use the lower value so weak peaks in busy regions survive, sparse maps
    the higher one to suppress isolated noise. ``beta`` is the absolute
    floor a peak itself must reach.
    """

    regime: str = "dense"
    alpha: float | None = None
    beta: float = 0.06
    pool_window: int = 7

    def __post_init__(self):
        if self.regime not in ("dense", "sparse"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.alpha is None:
            self.alpha = DENSE_ALPHA if self.regime == "dense" else SPARSE_ALPHA
        check_odd_window(self.pool_window)


def decode_points(density, config: DecodeConfig | None = None) -> PointSet:
    """Extract one point per local-maximum plateau of the density map.

    A pixel is a candidate when it equals the max-pooled map, the pooled
    value exceeds alpha, and its own value is at least beta. Candidates
    touching each other (8-connectivity) carry equal values by construction,
    so each connected group yields a single point at its first pixel in
    row-major order. Confidence is the density at that pixel.
    """
    if config is None:
        config = DecodeConfig()
    density = check_density_map(density, "density")
    pooled = max_pool(density, config.pool_window).astype(np.float64)
    mask = (density == pooled) & (pooled > config.alpha) & (density >= config.beta)
    if not mask.any():
        return PointSet(np.zeros((0, 2)), np.zeros(0))
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    flat_idx = np.flatnonzero(mask.reshape(-1))
    flat_labels = labels.reshape(-1)[flat_idx]
    _, first = np.unique(flat_labels, return_index=True)
    reps = flat_idx[np.sort(first)]
    rows, cols = np.unravel_index(reps, density.shape)
    points = np.stack([cols, rows], axis=1).astype(np.float64)
    confidences = density[rows, cols]
    return PointSet(points, confidences)


def _axis_origins(length: int, window: int, stride: int):
    """Window origins along one axis; the last window is clamped flush with
    the far edge. An axis shorter than the window gets a single full-extent
    window."""
    if length <= window:
        return [0], length
    origins = list(range(0, length - window + 1, stride))
    if origins[-1] != length - window:
        origins.append(length - window)
    return origins, window


def plan_windows(width, height, window=WINDOW_SIZE, stride=WINDOW_STRIDE):
    """Sliding-window placements covering the image.

    Returns a list of ``(x, y, w, h)`` rectangles in row-major order of
    origin.
    """
    check_positive(width, "width")
    check_positive(height, "height")
    check_positive(window, "window")
    check_positive(stride, "stride")
    xs, w = _axis_origins(int(width), int(window), int(stride))
    ys, h = _axis_origins(int(height), int(window), int(stride))
    return [(x, y, w, h) for y in ys for x in xs]


def fuse_windows(maps, placements, height, width):
    """Average overlapping window maps into one image-sized density map.

    ``maps[i]`` must have the extent its placement ``(x, y, w, h)`` claims.
    Accumulation runs in float64; every pixel must be covered by at least
    one window.
    """
    if len(maps) != len(placements):
        raise ValueError("one placement per window map required")
    acc = np.zeros((height, width), dtype=np.float64)
    count = np.zeros((height, width), dtype=np.int64)
    for m, (x, y, w, h) in zip(maps, placements):
        m = np.asarray(m)
        if m.shape != (h, w):
            raise DataError(f"window map shape {m.shape} does not match placement {(h, w)}")
        acc[y : y + h, x : x + w] += m
        count[y : y + h, x : x + w] += 1
    if np.any(count == 0):
        raise DataError("window plan leaves pixels uncovered")
    return (acc / count).astype(np.float32)


def localize(model: ProjectionModel, sample: ImageSample, config: DecodeConfig | None = None):
    """Full inference for one image: per-window densities, fused map, decoded
    points. Returns ``(point_set, fused_density)``."""
    if not sample.windows:
        raise DataError(f"sample {sample.image_id!r} has no windows")
    maps = []
    placements = []
    for win in sample.windows:
        d = predict_density(
            model, win.patches, sample.text_embedding, win.grid, win.height, win.width
        )
        maps.append(d)
        placements.append((win.x, win.y, win.width, win.height))
    fused = fuse_windows(maps, placements, sample.height, sample.width)
    return decode_points(fused, config), fused
