"""HTSR binary tensor format.

Layout: magic ``HTSR``, u8 version, u8 dtype tag (0 = f32, 1 = f64), u8 rank,
``rank`` little-endian u32 extents, then the little-endian IEEE-754 payload.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from tensor.tensor import Tensor

MAGIC = b"HTSR"
VERSION = 1
DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_HEADER = struct.Struct("<4sBBB")


class TensorFormatError(ValueError):
    """Raised for malformed HTSR payloads."""


def tag_for(array: np.ndarray) -> int:
    """Tag that stores ``array`` without loss: 1 for float64, else 0."""
    return 1 if np.asarray(array).dtype == np.float64 else 0


def encode(value: Union[np.ndarray, Tensor], dtype_tag: int = 0) -> bytes:
    array = value.data if isinstance(value, Tensor) else np.asarray(value)
    if dtype_tag not in DTYPE_TAGS:
        raise TensorFormatError(f"unsupported dtype tag {dtype_tag}")
    if array.ndim > 255:
        raise TensorFormatError(f"rank {array.ndim} exceeds the format limit")
    payload = np.ascontiguousarray(array, dtype=DTYPE_TAGS[dtype_tag])
    header = _HEADER.pack(MAGIC, VERSION, dtype_tag, array.ndim)
    extents = struct.pack(f"<{array.ndim}I", *array.shape)
    return header + extents + payload.tobytes()


def decode(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise TensorFormatError("truncated header")
    magic, version, tag, rank = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if tag not in DTYPE_TAGS:
        raise TensorFormatError(f"unsupported dtype tag {tag}")

    offset = _HEADER.size
    if len(blob) < offset + 4 * rank:
        raise TensorFormatError("truncated extents")
    shape = struct.unpack_from(f"<{rank}I", blob, offset)
    offset += 4 * rank
    dtype = DTYPE_TAGS[tag]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(blob) - offset != expected:
        raise TensorFormatError(f"payload has {len(blob) - offset} bytes, expected {expected}")
    return np.frombuffer(blob, dtype=dtype, offset=offset).reshape(shape).astype(dtype.newbyteorder("="))


def save_tensor(path: Union[str, Path], value: Union[np.ndarray, Tensor], dtype_tag: int = 0) -> None:
    """Write ``value`` as HTSR; f32 payload unless ``dtype_tag=1`` asks for f64."""
    Path(path).write_bytes(encode(value, dtype_tag))


def load_tensor(path: Union[str, Path]) -> np.ndarray:
    return decode(Path(path).read_bytes())
