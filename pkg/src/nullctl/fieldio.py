"""PFLD binary field files.

Layout (little-endian): magic ``b"PFLD"``, u32 version (1), u32 d,
d x u64 points per axis, d x f64 extents, then interleaved f64 (Re, Im)
samples in row-major order.  The grid is taken as centred at the origin.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import Field, Grid, REAL

MAGIC = b"PFLD"
VERSION = 1


class FieldFormatError(ValueError):
    pass


def write_field(path, f: Field) -> None:
    g = f.grid
    head = MAGIC + struct.pack("<II", VERSION, g.dim)
    head += struct.pack(f"<{g.dim}Q", *g.shape) + struct.pack(f"<{g.dim}d", *g.extent)
    data = np.empty(g.shape + (2,), dtype="<f8")
    data[..., 0] = f.values.real
    data[..., 1] = f.values.imag
    Path(path).write_bytes(head + data.tobytes(order="C"))


def read_field(path) -> Field:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {raw[:4]!r}")
    version, d = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FieldFormatError(f"{path}: unsupported version {version}")
    off = 12
    shape = struct.unpack_from(f"<{d}Q", raw, off)
    off += 8 * d
    extent = struct.unpack_from(f"<{d}d", raw, off)
    off += 8 * d
    n = int(np.prod(shape))
    if len(raw) - off != 16 * n:
        raise FieldFormatError(f"{path}: expected {16 * n} data bytes, found {len(raw) - off}")
    data = np.frombuffer(raw, dtype="<f8", offset=off).reshape(tuple(shape) + (2,))
    return Field(Grid(shape, extent), data[..., 0] + 1j * data[..., 1], REAL)
