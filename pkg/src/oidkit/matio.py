"""Binary matrix files and deterministic CSV output.

Matrix file layout (little-endian throughout):

    bytes 0-3   magic "OIDM"
    bytes 4-7   format version, uint32 (currently 1)
    bytes 8-15  rows, uint64
    bytes 16-23 cols, uint64
    bytes 24-   rows*cols float64 values, row-major

An empty (0 x 0) matrix is exactly the 24-byte header.  Read/write round
trips are bitwise exact.  CSV helpers write floats with `repr` (shortest
exact representation) and a fixed line terminator so identical data produces
byte-identical files on every platform.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "MatrixFileError",
    "write_matrix",
    "read_matrix",
    "write_csv",
    "MAGIC",
    "VERSION",
]

MAGIC = b"OIDM"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class MatrixFileError(ValueError):
    """Malformed or truncated matrix file."""


def write_matrix(path, array: np.ndarray) -> None:
    array = np.asarray(array, dtype=float)
    if array.ndim == 1:
        array = array[:, None]
    if array.ndim != 2:
        raise ValueError(f"matrix files hold 2-D arrays, got ndim={array.ndim}")
    rows, cols = array.shape
    payload = np.ascontiguousarray(array, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(payload)


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise MatrixFileError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFileError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise MatrixFileError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + rows * cols * 8
    if len(data) != expected:
        raise MatrixFileError(
            f"{path}: size mismatch, header promises {expected} bytes, file has {len(data)}"
        )
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return values.reshape(rows, cols).astype(float)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header: list[str], rows) -> None:
    """Write rows of numbers/strings with a header line, byte-deterministically."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
