"""Low-level helpers for the little-endian binary artifact formats.

Every format starts with 4 magic bytes, followed by a fixed header and an
f32 payload.  Writers are atomic: content is staged to a temp file in the
destination directory and renamed into place, so a failed run never leaves
a partial artifact.
"""

import os
import struct

import numpy as np

from .errors import BadMagicError, SizeMismatchError, TruncatedFileError


def write_atomic(path, data: bytes) -> None:
    """Write bytes to `path` via a same-directory temp file and rename."""
    path = os.fspath(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Reader:
    """Cursor over an in-memory artifact with format-aware error reporting."""

    def __init__(self, data: bytes, path=None):
        self.data = data
        self.pos = 0
        self.path = str(path) if path is not None else "<bytes>"

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"{self.path}: needed {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def expect_magic(self, magic: bytes) -> None:
        got = self.take(len(magic))
        if got != magic:
            raise BadMagicError(
                f"{self.path}: bad magic {got!r}, expected {magic!r}"
            )

    def unpack(self, fmt: str):
        # little-endian, no padding
        size = struct.calcsize("<" + fmt)
        return struct.unpack("<" + fmt, self.take(size))

    def f32_array(self, count: int, what: str) -> np.ndarray:
        need = 4 * count
        avail = len(self.data) - self.pos
        if avail < need:
            raise SizeMismatchError(
                f"{self.path}: {what} declares {count} f32 values "
                f"({need} bytes) but only {avail} bytes remain"
            )
        arr = np.frombuffer(self.data, dtype="<f4", count=count, offset=self.pos)
        self.pos += need
        return arr.copy()

    def expect_eof(self) -> None:
        extra = len(self.data) - self.pos
        if extra:
            raise SizeMismatchError(
                f"{self.path}: {extra} unexpected trailing bytes after payload"
            )


def read_file(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def pack(fmt: str, *values) -> bytes:
    return struct.pack("<" + fmt, *values)


def f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()
