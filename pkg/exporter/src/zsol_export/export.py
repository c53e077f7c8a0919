"""Export pipeline: encode, convert, write, then verify.

The flow per image is window plan -> per-window patch features -> one
stacked tensor, plus token/point files shared or per image. After all
files land, the job re-reads everything with the consumer package and
fails loudly on any disagreement, so a finished export is already
validated end to end.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import formats
from .datasets import ImageRecord, load_dataset
from .encoders import TextRecord, make_encoder
from .errors import ExportError
from .windows import plan


@dataclass
class ExportJob:
    dataset: str
    split: str
    out_dir: Path
    data_root: Path | None = None
    records: list[ImageRecord] = field(default_factory=list)
    encoder_name: str = "clip"
    dim: int = 32
    seed: int = 0
    workers: int = 1
    limit: int | None = None


def export_text(encoder, title: str, out_dir: Path, stem: str) -> dict:
    """Write token ids, the 77 x dim token matrix, and the sentence vector.

    The sentence embedding also sits in the end-marker row of the token
    matrix, which is how the consumer recovers it from a single file.
    """
    rec: TextRecord = encoder.embed_text(title)
    out_dir = Path(out_dir)
    token_file = f"{stem}_tokens.zstk"
    emb_file = f"{stem}_token_embeddings.zsol"
    sent_file = f"{stem}_sentence.zsol"
    formats.write_tokens(
        out_dir / token_file,
        rec.ids,
        rec.title_start,
        rec.title_length,
        rec.class_index,
        rec.end_index,
    )
    formats.write_tensor(out_dir / emb_file, rec.token_embeddings)
    formats.write_tensor(out_dir / sent_file, rec.sentence.reshape(1, -1))
    return {"token_file": token_file, "token_embedding_file": emb_file}


def load_image(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as e:
        raise ExportError(f"cannot read image {path}: {e}") from e


def export_image(encoder, pixels: np.ndarray, placements) -> np.ndarray:
    """Encode every planned window and stack to (windows, gh, gw, dim)."""
    per_window = []
    for x, y, w, h in placements:
        window = pixels[y : y + h, x : x + w]
        per_window.append(encoder.embed_window(window))
    shapes = {f.shape for f in per_window}
    if len(shapes) != 1:
        raise ExportError(f"windows produced mixed grids {sorted(shapes)}")
    return np.stack(per_window)


def export_points(record: ImageRecord, out_dir: Path) -> str:
    name = f"{record.image_id}_points.zspt"
    formats.write_points(Path(out_dir) / name, record.points)
    return name


def _pad_to_patch(pixels: np.ndarray, patch: int) -> np.ndarray:
    """Edge-pad so both sides are multiples of the patch size."""
    h, w, _ = pixels.shape
    ph = (-h) % patch
    pw = (-w) % patch
    if ph == 0 and pw == 0:
        return pixels
    return np.pad(pixels, ((0, ph), (0, pw), (0, 0)), mode="edge")


def run_export(job: ExportJob) -> Path:
    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    encoder = make_encoder(job.encoder_name, dim=job.dim, seed=job.seed)
    records = job.records or load_dataset(job.dataset, job.data_root, job.split)
    if job.limit is not None:
        records = records[: job.limit]
    if not records:
        raise ExportError("nothing to export")

    text_files: dict[str, dict] = {}
    for rec in records:
        if rec.category not in text_files:
            stem = rec.category.replace(" ", "_")
            text_files[rec.category] = export_text(encoder, rec.category, out, stem)

    def export_one(rec: ImageRecord) -> dict:
        pixels = _pad_to_patch(load_image(rec.image_path), 16)
        h, w, _ = pixels.shape
        placements = plan(w, h)
        stacked = export_image(encoder, pixels, placements)
        patch_file = f"{rec.image_id}_patches.zsol"
        formats.write_tensor(out / patch_file, stacked)
        entry = {
            "id": rec.image_id,
            "width": w,
            "height": h,
            "patch_file": patch_file,
            "points_file": export_points(rec, out),
            "category": rec.category,
        }
        entry.update(text_files[rec.category])
        return entry

    if job.workers > 1:
        with ThreadPoolExecutor(max_workers=job.workers) as pool:
            entries = list(pool.map(export_one, records))
    else:
        entries = [export_one(rec) for rec in records]

    manifest_path = out / "manifest.json"
    formats.write_manifest(manifest_path, entries)
    verify_with_consumer(manifest_path)
    return manifest_path


def verify_with_consumer(manifest_path) -> None:
    """Round-trip every artifact through the consumer package.

    Confirms parseability, window-plan agreement, and point bounds; any
    failure aborts the export with the consumer's own message.
    """
    from zsol.locate import plan_windows
    from zsol.manifest import load_manifest, load_samples

    manifest = load_manifest(manifest_path)
    samples = load_samples(manifest)
    for rec, sample in zip(manifest.records, samples):
        ours = plan(rec.width, rec.height)
        theirs = plan_windows(rec.width, rec.height)
        if ours != theirs:
            raise ExportError(
                f"{rec.id}: window plans disagree ({ours} vs {theirs})"
            )
        if not sample.windows:
            raise ExportError(f"{rec.id}: no windows after round trip")
