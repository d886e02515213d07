"""LGT1 tensor files.

Layout: an ASCII header line ``LGT1 <ndim> <d0> <d1> ...`` terminated by LF,
then ``prod(shape)`` little-endian float64 values in row-major order. Several
records may be concatenated in one stream.
"""

from __future__ import annotations

import os
from typing import BinaryIO

import numpy as np

MAGIC = "LGT1"
_MAX_HEADER = 4096


class MalformedTensorError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


def encode_tensor(arr) -> bytes:
    a = np.asarray(arr, dtype="<f8")  # tobytes() is row-major; ascontiguousarray would promote 0-d
    dims = " ".join(str(d) for d in a.shape)
    header = f"{MAGIC} {a.ndim}" + (f" {dims}" if dims else "") + "\n"
    return header.encode("ascii") + a.tobytes()


def write_tensor(fh: BinaryIO, arr) -> int:
    blob = encode_tensor(arr)
    fh.write(blob)
    return len(blob)


def read_tensor(fh: BinaryIO) -> np.ndarray:
    start = fh.tell()
    line = fh.readline(_MAX_HEADER)
    if not line:
        raise MalformedTensorError("unexpected end of stream, expected LGT1 header", start)
    if not line.endswith(b"\n"):
        raise MalformedTensorError("unterminated LGT1 header", start)
    try:
        fields = line.decode("ascii").split()
    except UnicodeDecodeError:
        raise MalformedTensorError("non-ASCII bytes in header", start) from None
    if len(fields) < 2 or fields[0] != MAGIC:
        raise MalformedTensorError(f"bad magic {fields[:1]!r}, expected {MAGIC}", start)
    try:
        ndim = int(fields[1])
        shape = tuple(int(d) for d in fields[2:])
    except ValueError:
        raise MalformedTensorError("non-integer dimension in header", start) from None
    if ndim != len(shape) or any(d < 0 for d in shape):
        raise MalformedTensorError(f"header declares ndim={ndim} but shape {shape}", start)
    count = int(np.prod(shape, dtype=np.int64))
    payload_at = fh.tell()
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise MalformedTensorError(
            f"truncated payload: expected {8 * count} bytes, found {len(raw)}", payload_at + len(raw)
        )
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def save_tensor(path: str | os.PathLike, arr) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, arr)


def load_tensor(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        arr = read_tensor(fh)
        trailing = fh.read(1)
        if trailing:
            raise MalformedTensorError("trailing bytes after tensor payload", fh.tell() - 1)
    return arr
