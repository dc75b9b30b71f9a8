"""File formats: raw noise tensors, Middlebury ``.flo`` flows and PGM previews.

Tensor file layout (all little-endian)::

    b"NWT1" | u8 ndim | ndim x u32 extents | u32 channels | float32 payload

The payload is in ``(channels, *extents)`` row-major order. Readers parse the
whole file before returning and writers go through a temporary file, so a
failure never leaves a partial output behind.
"""
from __future__ import annotations

import math
import os
import struct
import tempfile

import numpy as np

from .core import FormatError, check_flow

__all__ = ["read_tensor", "write_tensor", "read_flo", "write_flo", "export_pgm", "TENSOR_MAGIC", "FLO_MAGIC"]

TENSOR_MAGIC = b"NWT1"
FLO_MAGIC = 202021.25
MAX_EXTENT = 1 << 20


def _atomic_write(path, data: bytes) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_all(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def write_tensor(tensor, path) -> None:
    """Write a ``(C, *extents)`` array as float32."""
    arr = np.asarray(tensor)
    if arr.ndim < 2:
        raise ValueError("tensor needs a channel axis and at least one spatial axis")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    C, ext = arr.shape[0], arr.shape[1:]
    if len(ext) > 255 or any(e <= 0 or e >= 2 ** 32 for e in ext) or not 0 < C < 2 ** 32:
        raise ValueError(f"unsupported tensor shape {arr.shape}")
    head = TENSOR_MAGIC + struct.pack("<B", len(ext)) + struct.pack(f"<{len(ext)}I", *ext) + struct.pack("<I", C)
    _atomic_write(path, head + np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a tensor file as float32 ``(C, *extents)``."""
    buf = _read_all(path)
    if len(buf) < 5:
        raise FormatError("truncated tensor header", len(buf))
    if buf[:4] != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {buf[:4]!r}", 0)
    ndim = buf[4]
    if ndim == 0:
        raise FormatError("tensor has zero spatial axes", 4)
    end = 5 + 4 * ndim + 4
    if len(buf) < end:
        raise FormatError("truncated tensor header", len(buf))
    ext = struct.unpack_from(f"<{ndim}I", buf, 5)
    (C,) = struct.unpack_from("<I", buf, 5 + 4 * ndim)
    for k, e in enumerate(ext):
        if e == 0:
            raise FormatError("zero extent", 5 + 4 * k)
    if C == 0:
        raise FormatError("zero channel count", 5 + 4 * ndim)
    count = C * math.prod(ext)
    if len(buf) - end != 4 * count:
        raise FormatError(f"payload is {len(buf) - end} bytes, header implies {4 * count}",
                          min(len(buf), end + 4 * count))
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=end).astype(np.float32)
    bad = np.flatnonzero(~np.isfinite(data))
    if len(bad):
        raise FormatError("non-finite payload value", end + 4 * int(bad[0]))
    return data.reshape((C,) + tuple(ext))


def write_flo(flow, path) -> None:
    """Write a 2D flow ``(H, W, 2)`` as ``.flo``; u is the axis-1 and v the axis-0 displacement."""
    flow = check_flow(flow)
    if flow.shape[-1] != 2:
        raise ValueError(".flo holds 2D flows only")
    H, W = flow.shape[:2]
    uv = np.stack([flow[..., 1], flow[..., 0]], axis=-1).astype("<f4")
    _atomic_write(path, struct.pack("<fii", FLO_MAGIC, W, H) + uv.tobytes())


def read_flo(path) -> np.ndarray:
    """Read ``.flo`` into a float64 ``(H, W, 2)`` flow in axis order."""
    buf = _read_all(path)
    if len(buf) < 4:
        raise FormatError("truncated .flo magic", len(buf))
    (magic,) = struct.unpack_from("<f", buf, 0)
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"bad .flo magic {magic!r}", 0)
    if len(buf) < 12:
        raise FormatError("truncated .flo header", len(buf))
    W, H = struct.unpack_from("<ii", buf, 4)
    if W <= 0 or W > MAX_EXTENT:
        raise FormatError(f"invalid .flo width {W}", 4)
    if H <= 0 or H > MAX_EXTENT:
        raise FormatError(f"invalid .flo height {H}", 8)
    need = 12 + 8 * W * H
    if len(buf) != need:
        raise FormatError(f".flo payload is {len(buf) - 12} bytes, header implies {8 * W * H}", min(len(buf), need))
    uv = np.frombuffer(buf, dtype="<f4", count=2 * W * H, offset=12).reshape(H, W, 2)
    bad = np.flatnonzero(~np.isfinite(uv.ravel()))
    if len(bad):
        raise FormatError("non-finite flow value", 12 + 4 * int(bad[0]))
    return np.stack([uv[..., 1], uv[..., 0]], axis=-1).astype(np.float64)


def export_pgm(tensor, path, clip_sigma: float = 3.0) -> None:
    """Save a single-channel 2D tensor as binary PGM.

    ``[-clip_sigma, clip_sigma]`` maps linearly onto ``[0, 255]``, rounding half
    away from zero.
    """
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ValueError("PGM export needs a single-channel 2D tensor")
    if clip_sigma <= 0:
        raise ValueError("clip_sigma must be positive")
    x = (np.clip(arr, -clip_sigma, clip_sigma) + clip_sigma) * (255.0 / (2.0 * clip_sigma))
    pix = np.floor(x + 0.5).astype(np.uint8)
    H, W = pix.shape
    _atomic_write(path, f"P5\n{W} {H}\n255\n".encode("ascii") + pix.tobytes())
