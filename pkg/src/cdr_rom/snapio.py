"""``ROMSNAP1`` binary container for trajectories and bases.

Layout: 8 magic bytes, three little-endian uint64 (rows, cols, reserved=0),
``rows * cols`` little-endian float64 in column-major order, then one float64
time step.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"ROMSNAP1"
_HEADER = struct.Struct("<8sQQQ")


def write_snap(path: str | os.PathLike, matrix: np.ndarray, dt: float) -> None:
    a = np.asarray(matrix, dtype="<f8")
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError("ROMSNAP1 stores two-dimensional arrays only")
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols, 0))
        fh.write(np.asfortranarray(a).tobytes(order="F"))
        fh.write(struct.pack("<d", float(dt)))


def read_snap(path: str | os.PathLike) -> tuple[np.ndarray, float]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a ROMSNAP1 file")
    _, rows, cols, reserved = _HEADER.unpack_from(raw)
    if reserved != 0:
        raise ValueError(f"{path}: reserved header field must be zero")
    n = rows * cols
    expected = _HEADER.size + 8 * n + 8
    if len(raw) != expected:
        raise ValueError(f"{path}: size {len(raw)} does not match header ({expected} bytes)")
    data = np.frombuffer(raw, dtype="<f8", count=n, offset=_HEADER.size)
    matrix = data.reshape((rows, cols), order="F").astype(float)
    (dt,) = struct.unpack_from("<d", raw, _HEADER.size + 8 * n)
    return matrix, dt
