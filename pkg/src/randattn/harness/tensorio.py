"""Binary tensor files.

Layout: 8-byte magic ``MCATTN01``, a little-endian uint32 header length, a
UTF-8 JSON header ``{"dims": [rows, cols], "dtype": "f64", "order": "row-major"}``
and then rows*cols little-endian float64 values.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import TensorFormatError

MAGIC = b"MCATTN01"
_LEN = struct.Struct("<I")


def encode_tensor(X: np.ndarray) -> bytes:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"only 2-d tensors can be stored, got shape {X.shape}")
    header = json.dumps({"dims": list(X.shape), "dtype": "f64", "order": "row-major"}).encode("utf-8")
    return MAGIC + _LEN.pack(len(header)) + header + X.astype("<f8").tobytes(order="C")


def decode_tensor(blob: bytes) -> np.ndarray:
    if len(blob) < len(MAGIC) or blob[: len(MAGIC)] != MAGIC:
        raise TensorFormatError("bad magic, expected MCATTN01", 0)
    pos = len(MAGIC)
    if len(blob) < pos + _LEN.size:
        raise TensorFormatError("truncated header length", pos)
    (hlen,) = _LEN.unpack_from(blob, pos)
    pos += _LEN.size
    if len(blob) < pos + hlen:
        raise TensorFormatError(f"header claims {hlen} bytes but file ends early", pos)
    try:
        header = json.loads(blob[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorFormatError(f"header is not valid UTF-8 JSON ({exc})", pos) from None
    dims = header.get("dims") if isinstance(header, dict) else None
    if (
        not isinstance(dims, list)
        or len(dims) != 2
        or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 0 for d in dims)
    ):
        raise TensorFormatError(f"header dims must be two non-negative integers, got {dims!r}", pos)
    if header.get("dtype") != "f64" or header.get("order") != "row-major":
        raise TensorFormatError("only dtype f64 in row-major order is supported", pos)
    pos += hlen
    rows, cols = dims
    expected = rows * cols * 8
    if len(blob) - pos != expected:
        raise TensorFormatError(
            f"payload has {len(blob) - pos} bytes, dims {rows}x{cols} need {expected}", pos
        )
    return np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=pos).astype(np.float64).reshape(rows, cols)


def write_tensor(path, X: np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(X))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
