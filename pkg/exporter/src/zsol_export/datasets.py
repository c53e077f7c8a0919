"""Annotation readers for the three supported dataset families.

Each loader walks the conventional on-disk layout and yields uniform
records: image path, ground-truth center points in pixel coordinates,
and the text title used for prompting. Box annotations are reduced to
centers here so the rest of the pipeline only ever sees points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import loadmat

from .errors import ExportError


@dataclass
class ImageRecord:
    image_id: str
    image_path: Path
    points: np.ndarray  # (N, 2) float64 pixel coords
    category: str


def box_center(box) -> tuple[float, float]:
    """(x1, y1, x2, y2) -> box midpoint."""
    x1, y1, x2, y2 = (float(v) for v in box)
    return (x1 + x2) / 2.0, (y1 + y2) / 2.0


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise ExportError(f"{what} not found at {path}")
    return path


def load_fsc147(root, split: str) -> list[ImageRecord]:
    """FSC-147 layout: per-image point annotations plus a split index and
    an image-to-class listing."""
    root = Path(root)
    ann = json.loads(_require(root / "annotation_FSC147_384.json", "annotation file").read_text())
    splits = json.loads(
        _require(root / "Train_Test_Val_FSC_147.json", "split index").read_text()
    )
    if split not in splits:
        raise ExportError(f"unknown FSC-147 split {split!r} (have {sorted(splits)})")
    classes = {}
    for line in _require(root / "ImageClasses_FSC147.txt", "class listing").read_text().splitlines():
        if line.strip():
            name, _, title = line.partition("\t")
            classes[name.strip()] = title.strip()
    records = []
    for name in splits[split]:
        if name not in ann:
            raise ExportError(f"image {name} listed in split but missing from annotations")
        pts = np.asarray(ann[name].get("points", []), dtype=np.float64).reshape(-1, 2)
        records.append(
            ImageRecord(
                image_id=Path(name).stem,
                image_path=root / "images_384_VarV2" / name,
                points=pts,
                category=classes.get(name, "object"),
            )
        )
    return records


def load_shanghaitech(root, part: str, split: str) -> list[ImageRecord]:
    """ShanghaiTech part A/B: head points stored in per-image .mat files."""
    if split == "val":
        raise ExportError("ShanghaiTech ships train/test only")
    root = Path(root) / f"part_{part}" / f"{split}_data"
    images = sorted(_require(root / "images", "image directory").glob("IMG_*.jpg"))
    if not images:
        raise ExportError(f"no images under {root / 'images'}")
    records = []
    for img in images:
        mat_path = _require(root / "ground-truth" / f"GT_{img.stem}.mat", "ground truth")
        mat = loadmat(mat_path)
        try:
            pts = np.asarray(mat["image_info"][0, 0][0, 0][0], dtype=np.float64)
        except (KeyError, IndexError) as e:
            raise ExportError(f"{mat_path}: unexpected annotation structure") from e
        records.append(
            ImageRecord(
                image_id=img.stem,
                image_path=img,
                points=pts.reshape(-1, 2),
                category="people",
            )
        )
    return records


def load_carpk(root, split: str) -> list[ImageRecord]:
    """CARPK: box annotations per image, reduced to centers."""
    if split == "val":
        raise ExportError("CARPK ships train/test only")
    data = Path(root) / "CARPK_devkit" / "data"
    listing = _require(data / "ImageSets" / f"{split}.txt", "split listing")
    records = []
    for name in listing.read_text().split():
        ann = _require(data / "Annotations" / f"{name}.txt", "annotation file")
        centers = []
        for line in ann.read_text().splitlines():
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 4:
                raise ExportError(f"{ann}: bad box line {line!r}")
            centers.append(box_center(parts[:4]))
        records.append(
            ImageRecord(
                image_id=name,
                image_path=data / "Images" / f"{name}.png",
                points=np.asarray(centers, dtype=np.float64).reshape(-1, 2),
                category="cars",
            )
        )
    return records


DATASET_TITLES = {
    "fsc147": None,  # per-image class titles
    "shtechA": "people",
    "shtechB": "people",
    "carpk": "cars",
}


def load_dataset(name: str, root, split: str) -> list[ImageRecord]:
    if name == "fsc147":
        return load_fsc147(root, split)
    if name == "shtechA":
        return load_shanghaitech(root, "A", split)
    if name == "shtechB":
        return load_shanghaitech(root, "B", split)
    if name == "carpk":
        return load_carpk(root, split)
    raise ExportError(f"unknown dataset {name!r}")
