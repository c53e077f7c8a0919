"""Dataset manifests: a JSON index tying images to their artifact files.

Each sample record points at a patch-embedding tensor (one stacked tensor
of shape ``n_windows x grid_h x grid_w x dim`` matching the window plan for
the image size), a token file, a token-embedding tensor (77 x dim, sentence
vector stored at the end-marker row), and optionally a ground-truth point
file and a category label. Paths are relative to the manifest location.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import ImageSample, WindowPatches
from .errors import DataError
from .fileio import read_points, read_tensor, read_tokens
from .locate import plan_windows
from .tssm import build_text_bundle
from .validation import check_points

MANIFEST_VERSION = 1

_REQUIRED = ("id", "width", "height", "patch_file", "token_file", "token_embedding_file")
_OPTIONAL = ("points_file", "category")


@dataclass
class ManifestRecord:
    id: str
    width: int
    height: int
    patch_file: str
    token_file: str
    token_embedding_file: str
    points_file: str | None = None
    category: str | None = None


@dataclass
class Manifest:
    root: Path
    records: list[ManifestRecord]

    def resolve(self, name: str) -> Path:
        return self.root / name


def write_manifest(path, records) -> None:
    path = Path(path)
    payload = {
        "version": MANIFEST_VERSION,
        "samples": [
            {k: v for k, v in vars(r).items() if v is not None} for r in records
        ],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as e:
        raise DataError(f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(payload, dict) or "samples" not in payload:
        raise DataError(f"{path}: manifest must be an object with a 'samples' list")
    if payload.get("version", MANIFEST_VERSION) != MANIFEST_VERSION:
        raise DataError(f"{path}: unsupported manifest version {payload.get('version')}")
    records = []
    for i, entry in enumerate(payload["samples"]):
        missing = [k for k in _REQUIRED if k not in entry]
        if missing:
            raise DataError(f"{path}: sample {i} missing keys {missing}")
        unknown = [k for k in entry if k not in _REQUIRED + _OPTIONAL]
        if unknown:
            raise DataError(f"{path}: sample {i} has unknown keys {unknown}")
        rec = ManifestRecord(**entry)
        if rec.width <= 0 or rec.height <= 0:
            raise DataError(f"{path}: sample {rec.id}: non-positive image size")
        records.append(rec)
    manifest = Manifest(root=path.parent, records=records)
    for rec in records:
        for name in (rec.patch_file, rec.token_file, rec.token_embedding_file, rec.points_file):
            if name is not None and not manifest.resolve(name).is_file():
                raise DataError(f"{path}: sample {rec.id}: missing file {name}")
    return manifest


def load_sample(manifest: Manifest, rec: ManifestRecord) -> ImageSample:
    """Materialize one record: read artifacts, run the text branch, and lay
    the stacked patch tensor onto the window plan."""
    seq = read_tokens(manifest.resolve(rec.token_file))
    token_emb = read_tensor(manifest.resolve(rec.token_embedding_file)).astype(np.float64)
    if token_emb.ndim != 2 or token_emb.shape[0] != seq.ids.shape[0]:
        raise DataError(f"{rec.id}: token embedding tensor must be 77 x dim")
    bundle = build_text_bundle(seq, token_emb, token_emb[seq.end_index])

    patches = read_tensor(manifest.resolve(rec.patch_file))
    if patches.ndim != 4:
        raise DataError(f"{rec.id}: patch tensor must be windows x gh x gw x dim")
    plan = plan_windows(rec.width, rec.height)
    if patches.shape[0] != len(plan):
        raise DataError(
            f"{rec.id}: {patches.shape[0]} windows in tensor, plan expects {len(plan)}"
        )
    n, gh, gw, dim = patches.shape
    windows = [
        WindowPatches(
            x=x,
            y=y,
            width=w,
            height=h,
            grid=(gh, gw),
            patches=patches[i].reshape(gh * gw, dim).astype(np.float64),
        )
        for i, (x, y, w, h) in enumerate(plan)
    ]

    gt = None
    if rec.points_file is not None:
        pts = read_points(manifest.resolve(rec.points_file))
        gt = check_points(pts.points, f"{rec.id} gt points", rec.height, rec.width)
    return ImageSample(
        image_id=rec.id,
        width=rec.width,
        height=rec.height,
        windows=windows,
        text_embedding=bundle.self_support,
        gt_points=gt,
        category=rec.category,
    )


def load_samples(manifest: Manifest) -> list[ImageSample]:
    return [load_sample(manifest, rec) for rec in manifest.records]
