"""Bit-exact binary tensor file format ("PTEN").

Layout, all little-endian:
    magic   4 bytes  b"PTEN"
    version u8       1
    dtype   u8       0 = float32, 1 = uint8
    rank    u8
    padding 5 bytes  zeros
    dims    rank x u64
    payload row-major (C order) elements
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"PTEN"
VERSION = 1
_DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("u1"): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
_MAX_RANK = 8


class TensorFormatError(ValueError):
    """File is not a valid PTEN tensor."""


def write_tensor(path, tensor: np.ndarray) -> None:
    """Serialize a float32 or uint8 array; roundtrips bit-exactly."""
    arr = np.ascontiguousarray(tensor)
    if arr.dtype == np.float64:
        raise TypeError("PTEN stores float32 or uint8; cast explicitly first")
    if arr.dtype not in _DTYPE_CODES:
        raise TypeError(f"unsupported dtype {arr.dtype}; PTEN stores float32 or uint8")
    if not (1 <= arr.ndim <= _MAX_RANK):
        raise TensorFormatError(f"rank {arr.ndim} outside supported range 1..{_MAX_RANK}")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValueError("refusing to persist non-finite values")
    header = MAGIC + struct.pack(
        "<BBB5x", VERSION, _DTYPE_CODES[arr.dtype], arr.ndim
    )
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    Path(path).write_bytes(header + dims + arr.astype(arr.dtype, order="C").tobytes())


def read_tensor(path) -> np.ndarray:
    """Parse a PTEN file back into an array. Raises TensorFormatError on a
    bad magic, bad header field, or truncated payload."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise TensorFormatError("file too short for a PTEN header")
    if raw[:4] != MAGIC:
        raise TensorFormatError(f"bad magic {raw[:4]!r}")
    version, dtype_code, rank = struct.unpack_from("<BBB", raw, 4)
    if version != VERSION:
        raise TensorFormatError(f"unsupported PTEN version {version}")
    if dtype_code not in _CODE_DTYPES:
        raise TensorFormatError(f"unknown dtype code {dtype_code}")
    if not (1 <= rank <= _MAX_RANK):
        raise TensorFormatError(f"unsupported rank {rank}")
    offset = 12
    if len(raw) < offset + 8 * rank:
        raise TensorFormatError("truncated dimension table")
    dims = struct.unpack_from(f"<{rank}Q", raw, offset)
    offset += 8 * rank
    dtype = _CODE_DTYPES[dtype_code]
    count = int(np.prod(dims, dtype=np.uint64)) if dims else 0
    expected = offset + count * dtype.itemsize
    if len(raw) != expected:
        raise TensorFormatError(
            f"payload size mismatch: file has {len(raw)} bytes, header implies {expected}"
        )
    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    return flat.reshape(dims).copy()
