"""Writers for the localization toolkit's binary containers.

These are written from the published byte layouts rather than borrowed
from the consumer package, so the export tests exercise a genuine
cross-implementation round trip. All fields are little-endian; writes go
through a temp file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

TENSOR_MAGIC = b"ZSOL"
POINTS_MAGIC = b"ZSPT"
TOKENS_MAGIC = b"ZSTK"
VERSION = 1
DTYPE_F32 = 1
TOKEN_LENGTH = 77
MANIFEST_VERSION = 1


def _atomic_write(path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def write_tensor(path, array) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim < 1:
        raise ValueError("tensor needs at least one dimension")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{path}: refusing to write non-finite tensor")
    header = TENSOR_MAGIC + struct.pack("<BBBB", VERSION, DTYPE_F32, arr.ndim, 0)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    _atomic_write(path, header + dims + arr.tobytes())


def write_points(path, points, confidences=None) -> None:
    pts = np.ascontiguousarray(np.asarray(points, dtype="<f4").reshape(-1, 2))
    payload = POINTS_MAGIC + struct.pack("<BI", VERSION, pts.shape[0]) + pts.tobytes()
    if confidences is None:
        payload += b"\x00"
    else:
        conf = np.ascontiguousarray(confidences, dtype="<f4")
        if conf.shape != (pts.shape[0],):
            raise ValueError("one confidence per point required")
        payload += b"\x01" + conf.tobytes()
    _atomic_write(path, payload)


def write_tokens(path, ids, title_start, title_length, class_index, end_index) -> None:
    arr = np.ascontiguousarray(np.asarray(ids, dtype="<u4"))
    if arr.shape != (TOKEN_LENGTH,):
        raise ValueError(f"token sequence must have length {TOKEN_LENGTH}")
    payload = (
        TOKENS_MAGIC
        + struct.pack("<B", VERSION)
        + arr.tobytes()
        + struct.pack("<4H", title_start, title_length, class_index, end_index)
    )
    _atomic_write(path, payload)


def write_manifest(path, records) -> None:
    """Manifest JSON the consumer CLI loads; records are plain dicts."""
    payload = {"version": MANIFEST_VERSION, "samples": list(records)}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _atomic_write(path, text.encode("utf-8"))
