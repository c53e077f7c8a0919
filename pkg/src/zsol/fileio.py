"""Binary file formats shared across the pipeline.

All multi-byte fields are little-endian. Four container formats:

tensor  magic ``ZSOL``, version 0x01, dtype 0x01 (float32), ndim byte,
        one reserved zero byte, ndim u32 dims, row-major float32 payload
points  magic ``ZSPT``, version 0x01, u32 count, count pairs of (x, y)
        float32, one presence byte, then count float32 confidences when
        the presence byte is 1
tokens  magic ``ZSTK``, version 0x01, 77 u32 token ids, then title start,
        title length, class index, end index as u16
model   magic ``ZSMD``, version 0x01, input dim u32, output dim u32,
        temperature float32, weights (in x out) then bias float32
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .grid import PointSet

TENSOR_MAGIC = b"ZSOL"
POINTS_MAGIC = b"ZSPT"
TOKENS_MAGIC = b"ZSTK"
MODEL_MAGIC = b"ZSMD"
FORMAT_VERSION = 1
DTYPE_F32 = 1
TOKEN_LENGTH = 77


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise DataError(f"truncated file while reading {what}")
    return buf


def _check_header(f, magic, path):
    got = f.read(4)
    if got != magic:
        raise DataError(f"{path}: bad magic {got!r}, expected {magic!r}")
    version = _read_exact(f, 1, "version")[0]
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")


def write_tensor(path, array):
    """Write a float32 tensor file of any rank up to 255."""
    arr = np.asarray(array, dtype=np.float32)
    if arr.ndim < 1 or arr.ndim > 255:
        raise ValueError(f"unsupported ndim {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: refusing to write non-finite tensor")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<BBBB", FORMAT_VERSION, DTYPE_F32, arr.ndim, 0))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_tensor(path):
    path = Path(path)
    try:
        with open(path, "rb") as f:
            _check_header(f, TENSOR_MAGIC, path)
            dtype, ndim, reserved = struct.unpack("<BBB", _read_exact(f, 3, "tensor header"))
            if dtype != DTYPE_F32:
                raise DataError(f"{path}: unsupported dtype byte {dtype}")
            if reserved != 0:
                raise DataError(f"{path}: reserved byte must be 0, got {reserved}")
            if ndim < 1:
                raise DataError(f"{path}: ndim must be >= 1")
            dims = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, "dims"))
            count = int(np.prod(dims, dtype=np.int64))
            payload = _read_exact(f, 4 * count, "payload")
            if f.read(1):
                raise DataError(f"{path}: trailing bytes after payload")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{path}: tensor contains non-finite values")
        return np.array(arr, dtype=np.float32)
    except OSError as e:
        raise DataError(f"{path}: {e}") from e


def write_points(path, points: PointSet):
    pts = np.asarray(points.points, dtype="<f4")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(POINTS_MAGIC)
        f.write(struct.pack("<BI", FORMAT_VERSION, pts.shape[0]))
        f.write(np.ascontiguousarray(pts).tobytes())
        if points.confidences is None:
            f.write(b"\x00")
        else:
            f.write(b"\x01")
            f.write(np.ascontiguousarray(points.confidences, dtype="<f4").tobytes())


def read_points(path) -> PointSet:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            _check_header(f, POINTS_MAGIC, path)
            (count,) = struct.unpack("<I", _read_exact(f, 4, "point count"))
            coords = np.frombuffer(_read_exact(f, 8 * count, "points"), dtype="<f4")
            flag = _read_exact(f, 1, "confidence flag")[0]
            conf = None
            if flag == 1:
                conf = np.frombuffer(_read_exact(f, 4 * count, "confidences"), dtype="<f4")
            elif flag != 0:
                raise DataError(f"{path}: bad confidence flag {flag}")
            if f.read(1):
                raise DataError(f"{path}: trailing bytes")
        pts = coords.reshape(count, 2).astype(np.float64)
        return PointSet(pts, None if conf is None else conf.astype(np.float64))
    except OSError as e:
        raise DataError(f"{path}: {e}") from e
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e


def write_tokens(path, seq):
    """Write a TokenSequence (see :mod:`zsol.tssm`)."""
    ids = np.asarray(seq.ids, dtype="<u4")
    if ids.shape != (TOKEN_LENGTH,):
        raise ValueError(f"token ids must have length {TOKEN_LENGTH}")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(TOKENS_MAGIC)
        f.write(struct.pack("<B", FORMAT_VERSION))
        f.write(np.ascontiguousarray(ids).tobytes())
        f.write(
            struct.pack(
                "<4H",
                seq.title_start,
                seq.title_length,
                seq.class_index,
                seq.end_index,
            )
        )


def read_tokens(path):
    from .tssm import TokenSequence

    path = Path(path)
    try:
        with open(path, "rb") as f:
            _check_header(f, TOKENS_MAGIC, path)
            ids = np.frombuffer(_read_exact(f, 4 * TOKEN_LENGTH, "token ids"), dtype="<u4")
            start, length, cls, end = struct.unpack("<4H", _read_exact(f, 8, "span fields"))
            if f.read(1):
                raise DataError(f"{path}: trailing bytes")
        return TokenSequence(
            ids=np.array(ids, dtype=np.int64),
            class_index=cls,
            end_index=end,
            title_start=start,
            title_length=length,
        )
    except OSError as e:
        raise DataError(f"{path}: {e}") from e
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e


def write_model(path, model):
    """Write a ProjectionModel checkpoint (see :mod:`zsol.align`)."""
    weights = np.asarray(model.weights, dtype="<f4")
    bias = np.asarray(model.bias, dtype="<f4")
    d_in, d_out = weights.shape
    if bias.shape != (d_out,):
        raise ValueError("bias shape does not match weights")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<BIIf", FORMAT_VERSION, d_in, d_out, float(model.temperature)))
        f.write(np.ascontiguousarray(weights).tobytes())
        f.write(np.ascontiguousarray(bias).tobytes())


def read_model(path):
    from .align import ProjectionModel

    path = Path(path)
    try:
        with open(path, "rb") as f:
            _check_header(f, MODEL_MAGIC, path)
            d_in, d_out, tau = struct.unpack("<IIf", _read_exact(f, 12, "model header"))
            weights = np.frombuffer(
                _read_exact(f, 4 * d_in * d_out, "weights"), dtype="<f4"
            ).reshape(d_in, d_out)
            bias = np.frombuffer(_read_exact(f, 4 * d_out, "bias"), dtype="<f4")
            if f.read(1):
                raise DataError(f"{path}: trailing bytes")
        return ProjectionModel(
            weights=weights.astype(np.float64),
            bias=bias.astype(np.float64),
            temperature=float(tau),
        )
    except OSError as e:
        raise DataError(f"{path}: {e}") from e


def write_history_csv(path, history):
    """Loss history as ``epoch,stage,loss`` rows."""
    lines = ["epoch,stage,loss"]
    for i, (stage, loss) in enumerate(history, start=1):
        lines.append(f"{i},{stage},{loss:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_history_csv(path):
    rows = []
    try:
        lines = Path(path).read_text().strip().splitlines()
    except OSError as e:
        raise DataError(f"{path}: {e}") from e
    for line in lines[1:]:
        epoch, stage, loss = line.split(",")
        rows.append((int(epoch), stage, float(loss)))
    return rows
