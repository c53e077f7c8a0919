"""Sample containers passed between manifest loading, training, and inference."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class WindowPatches:
    """Patch embeddings for one sliding window of an image."""

    x: int
    y: int
    width: int
    height: int
    grid: tuple[int, int]  # (rows, cols) of the patch grid
    patches: np.ndarray  # (rows * cols) x D, row-major over the grid

    def __post_init__(self):
        gh, gw = self.grid
        if self.patches.ndim != 2 or self.patches.shape[0] != gh * gw:
            raise ValueError(
                f"patch matrix has {self.patches.shape} rows, expected grid {gh}x{gw}"
            )


@dataclass
class ImageSample:
    """One image: its windows, text vector, and optional ground truth."""

    image_id: str
    width: int
    height: int
    windows: list[WindowPatches]
    text_embedding: np.ndarray  # self-support vector the model aligns to
    gt_points: Optional[np.ndarray] = None  # (N, 2) pixel coords, full image
    category: Optional[str] = None


@dataclass
class TrainSample:
    """One training crop: a single window plus the points inside it."""

    patches: np.ndarray  # Np x D
    grid: tuple[int, int]
    height: int
    width: int
    text_embedding: np.ndarray
    gt_points: np.ndarray  # (N, 2), window-local coords


def crops_from_image(sample: ImageSample) -> list[TrainSample]:
    """Expand an image sample into per-window training crops.

    Ground-truth points are shifted into window-local coordinates; points
    outside a window are dropped from that crop.
    """
    if sample.gt_points is None:
        raise ValueError(f"{sample.image_id}: training requires ground-truth points")
    crops = []
    pts = np.asarray(sample.gt_points, dtype=np.float64).reshape(-1, 2)
    for win in sample.windows:
        local = pts - np.array([win.x, win.y], dtype=np.float64)
        keep = (
            (local[:, 0] >= 0)
            & (local[:, 0] < win.width)
            & (local[:, 1] >= 0)
            & (local[:, 1] < win.height)
        )
        crops.append(
            TrainSample(
                patches=win.patches,
                grid=win.grid,
                height=win.height,
                width=win.width,
                text_embedding=sample.text_embedding,
                gt_points=local[keep],
            )
        )
    return crops
