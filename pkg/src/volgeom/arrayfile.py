"""Binary array files: a 16-byte header followed by little-endian unsigned data.

Header layout (all little-endian)::

    bytes 0-1   magic b"VG"
    byte  2     element width in bytes (1, 2, 4 or 8)
    byte  3     rank (0-3)
    bytes 4-15  three uint32 extents, unused ones zero
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"VG"
HEADER = struct.Struct("<2sBB3I")
HEADER_SIZE = HEADER.size  # 16
WIDTHS = (1, 2, 4, 8)


class ArrayFormatError(ValueError):
    pass


def _dtype(width: int) -> np.dtype:
    return np.dtype(f"<u{width}")


def encode_header(shape, width: int) -> bytes:
    if width not in WIDTHS:
        raise ArrayFormatError(f"unsupported element width {width}")
    if len(shape) > 3:
        raise ArrayFormatError(f"rank {len(shape)} exceeds 3")
    extents = list(shape) + [0] * (3 - len(shape))
    if any(e >= 2**32 for e in extents):
        raise ArrayFormatError(f"extent too large in {tuple(shape)}")
    return HEADER.pack(MAGIC, width, len(shape), *extents)


def read_header(path) -> tuple[tuple[int, ...], int]:
    with open(path, "rb") as f:
        raw = f.read(HEADER_SIZE)
    if len(raw) != HEADER_SIZE:
        raise ArrayFormatError(f"{path}: truncated header")
    magic, width, rank, *extents = HEADER.unpack(raw)
    if magic != MAGIC or width not in WIDTHS or rank > 3:
        raise ArrayFormatError(f"{path}: not an array file")
    return tuple(extents[:rank]), width


def write_array(path, array) -> None:
    """Write ``array`` atomically (temp file + rename)."""
    a = np.asarray(array)
    if a.dtype.kind not in "ui":
        raise ArrayFormatError(f"only integer arrays can be stored, got {a.dtype}")
    if a.dtype.kind == "i":
        if a.size and a.min() < 0:
            raise ArrayFormatError("negative values cannot be stored")
        a = a.astype(f"u{a.dtype.itemsize}")
    width = a.dtype.itemsize
    path = Path(path)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(encode_header(a.shape, width))
            f.write(np.ascontiguousarray(a, dtype=_dtype(width)).tobytes())
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def read_array(path, mmap: bool = False) -> np.ndarray:
    shape, width = read_header(path)
    count = int(np.prod(shape)) if shape else 1
    expected = HEADER_SIZE + count * width
    actual = os.path.getsize(path)
    if actual != expected:
        raise ArrayFormatError(f"{path}: expected {expected} bytes, found {actual}")
    if mmap and count:
        return np.memmap(path, dtype=_dtype(width), mode="r", offset=HEADER_SIZE, shape=shape)
    with open(path, "rb") as f:
        f.seek(HEADER_SIZE)
        data = np.frombuffer(f.read(count * width), dtype=_dtype(width))
    return data.reshape(shape).copy()


def read_raw(path, shape, element_width: int = 4, mmap: bool = True) -> np.ndarray:
    """Open a headerless C-ordered little-endian volume of known shape."""
    shape = tuple(int(n) for n in shape)
    expected = int(np.prod(shape)) * element_width
    actual = os.path.getsize(path)
    if actual != expected:
        raise ArrayFormatError(
            f"{path}: {actual} bytes does not match shape {shape} x {element_width} bytes"
        )
    dtype = _dtype(element_width)
    if mmap:
        return np.memmap(path, dtype=dtype, mode="r", shape=shape)
    return np.fromfile(path, dtype=dtype).reshape(shape)
