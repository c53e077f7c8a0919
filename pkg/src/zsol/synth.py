"""Synthetic scene generator.

Stands in for a frozen image encoder at desk scale: objects are planted on
the patch grid, object patches get the unit sentence vector plus scaled
noise, background patches are pure noise. Every artifact the real pipeline
would read (patch tensors, token files, token embeddings, point files,
manifest) is written, so the training and inference paths run unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fileio import write_points, write_tensor, write_tokens
from .grid import PointSet
from .locate import plan_windows
from .manifest import ManifestRecord, write_manifest
from .tssm import MockTextEncoder, MockTokenizer


@dataclass
class SyntheticSceneSpec:
    n_scenes: int = 10
    count_range: tuple[int, int] = (2, 6)
    image_size: int = 128
    embedding_dim: int = 32
    snr: float = 10.0
    seed: int = 0
    patch_size: int = 16
    title: str = "widget"

    def __post_init__(self):
        lo, hi = self.count_range
        if lo < 0 or hi < lo:
            raise ValueError("count range must satisfy 0 <= lo <= hi")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if self.n_scenes < 1:
            raise ValueError("need at least one scene")
        if self.image_size % self.patch_size:
            raise ValueError("image size must be a multiple of the patch size")


def _place_cells(rng, grid, count, min_sep=2):
    """Greedily pick ``count`` interior grid cells with pairwise Chebyshev
    distance >= min_sep, scanning a random permutation.

    Separation keeps decoded plateaus from merging; border cells are
    excluded because the edge-clamped upsampler flattens their peaks against
    the image boundary, which would blur the planted positions.
    """
    order = rng.permutation(grid * grid)
    if count == 0:
        return []
    taken: list[tuple[int, int]] = []
    for cell in order:
        r, c = divmod(int(cell), grid)
        if not (0 < r < grid - 1 and 0 < c < grid - 1):
            continue
        if all(max(abs(r - rr), abs(c - cc)) >= min_sep for rr, cc in taken):
            taken.append((r, c))
            if len(taken) == count:
                break
    if len(taken) < count:
        raise ValueError(f"cannot place {count} objects on a {grid}x{grid} grid")
    return taken


def gen_synthetic(spec: SyntheticSceneSpec, out_dir) -> Path:
    """Write a full scene tree under ``out_dir`` and return the manifest
    path. Byte-identical for a fixed spec."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    tokenizer = MockTokenizer()
    seq = tokenizer.encode(spec.title)
    encoder = MockTextEncoder(dim=spec.embedding_dim, seed=spec.seed)
    token_emb, sentence = encoder.embed(seq)
    write_tokens(out / "tokens.zstk", seq)
    write_tensor(out / "token_embeddings.zsol", token_emb)

    rng = np.random.default_rng(spec.seed)
    grid = spec.image_size // spec.patch_size
    half = (spec.patch_size - 1) / 2.0
    plan = plan_windows(spec.image_size, spec.image_size)
    lo, hi = spec.count_range

    records = []
    for i in range(spec.n_scenes):
        count = int(rng.integers(lo, hi + 1))
        cells = _place_cells(rng, grid, count)
        noise = rng.standard_normal((grid, grid, spec.embedding_dim)) / np.sqrt(
            spec.embedding_dim
        )
        patches = noise.copy()
        for r, c in cells:
            patches[r, c] = sentence + noise[r, c] / spec.snr
        points = np.array(
            [(spec.patch_size * c + half, spec.patch_size * r + half) for r, c in cells],
            dtype=np.float64,
        ).reshape(-1, 2)

        stacked = np.stack(
            [
                patches[
                    y // spec.patch_size : (y + h) // spec.patch_size,
                    x // spec.patch_size : (x + w) // spec.patch_size,
                ]
                for x, y, w, h in plan
            ]
        )
        name = f"scene_{i:04d}"
        write_tensor(out / f"{name}_patches.zsol", stacked)
        write_points(out / f"{name}_points.zspt", PointSet(points))
        records.append(
            ManifestRecord(
                id=name,
                width=spec.image_size,
                height=spec.image_size,
                patch_file=f"{name}_patches.zsol",
                token_file="tokens.zstk",
                token_embedding_file="token_embeddings.zsol",
                points_file=f"{name}_points.zspt",
                category=spec.title,
            )
        )

    manifest_path = out / "manifest.json"
    write_manifest(manifest_path, records)
    return manifest_path
