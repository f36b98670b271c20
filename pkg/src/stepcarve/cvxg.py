"""CVXG grid files: a tiny binary container for voxel grids and masks.

Layout, in order:

* line 1: the ASCII magic ``CVXG 1`` followed by a newline
* line 2: the extents ``X Y Z`` as decimal integers, space separated,
  followed by a newline
* payload: ``X*Y*Z`` little-endian float32 samples in row-major order with
  z varying fastest

Values are stored at single precision; writing casts to float32, so a
write/read round trip is exact for float32-representable data. Masks use
the same container with Z=1. Extents are limited to 512 per axis.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

__all__ = [
    "CvxgError",
    "read_mask",
    "read_voxel_grid",
    "write_mask",
    "write_voxel_grid",
]

MAGIC = b"CVXG 1"
MAX_EXTENT = 512


class CvxgError(ValueError):
    """Malformed CVXG content; ``offset`` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _check_dims(dims, where: str):
    if len(dims) != 3:
        raise ValueError(f"{where}: grid must have exactly 3 extents, got {len(dims)}")
    for d in dims:
        if not 1 <= d <= MAX_EXTENT:
            raise ValueError(
                f"{where}: extents must lie in [1, {MAX_EXTENT}], got {tuple(dims)}"
            )


def write_voxel_grid(path, grid) -> None:
    """Write a 3-d real grid; values are cast to float32."""
    arr = np.asarray(grid, dtype=np.float32)
    if arr.ndim != 3:
        raise ValueError(f"grid must be 3-d, got shape {arr.shape}")
    _check_dims(arr.shape, "write_voxel_grid")
    x, y, z = arr.shape
    header = MAGIC + b"\n" + f"{x} {y} {z}\n".encode("ascii")
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_voxel_grid(path) -> np.ndarray:
    """Read a grid back as float64 (values are exactly the stored float32s)."""
    data = Path(path).read_bytes()
    magic_line = MAGIC + b"\n"
    if not data.startswith(magic_line):
        raise CvxgError(f"bad magic, expected {MAGIC!r}", offset=0)
    dims_end = data.find(b"\n", len(magic_line))
    if dims_end < 0:
        raise CvxgError("missing extents line", offset=len(magic_line))
    dims_raw = data[len(magic_line):dims_end]
    parts = dims_raw.split()
    if len(parts) != 3:
        raise CvxgError(
            f"extents line must hold 3 integers, got {dims_raw!r}", offset=len(magic_line)
        )
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise CvxgError(
            f"extents line must hold 3 integers, got {dims_raw!r}", offset=len(magic_line)
        ) from None
    for d in dims:
        if not 1 <= d <= MAX_EXTENT:
            raise CvxgError(
                f"extents must lie in [1, {MAX_EXTENT}], got {dims}", offset=len(magic_line)
            )
    payload_start = dims_end + 1
    expected = 4 * dims[0] * dims[1] * dims[2]
    actual = len(data) - payload_start
    if actual != expected:
        raise CvxgError(
            f"payload holds {actual} bytes, expected {expected}", offset=payload_start
        )
    values = np.frombuffer(data, dtype="<f4", offset=payload_start)
    return values.reshape(dims).astype(np.float64)


def write_mask(path, mask) -> None:
    """Write a 2-d binary mask as a Z=1 grid."""
    arr = np.asarray(mask, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-d, got shape {arr.shape}")
    if not np.isin(arr, (0.0, 1.0)).all():
        raise ValueError("mask values must be binary (0 or 1)")
    write_voxel_grid(path, arr[:, :, None])


def read_mask(path) -> np.ndarray:
    """Read a Z=1 grid back as a 2-d binary mask."""
    grid = read_voxel_grid(path)
    if grid.shape[2] != 1:
        raise CvxgError(f"mask file must have Z=1, got extents {grid.shape}", offset=len(MAGIC) + 1)
    mask = grid[:, :, 0]
    if not np.isin(mask, (0.0, 1.0)).all():
        raise CvxgError("mask payload holds non-binary values", offset=len(MAGIC) + 1)
    return mask
