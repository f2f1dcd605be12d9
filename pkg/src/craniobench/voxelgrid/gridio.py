"""Binary cache format for sparse grids ("CIGD").

Layout: magic "CIGD", version u32, kind u8, voxel size f64, origin 3*f64,
band f64, chunk count u64; then per chunk the coordinate (3*i32) and 4096
little-endian f32 values. Chunks are written in sorted key order so the
round-trip is bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import VolumeFormatError
from .grid import CHUNK, GridKind, SparseGrid

_MAGIC = b"CIGD"
_VERSION = 1
_KIND_CODE = {GridKind.OCCUPANCY: 0, GridKind.COUNT: 1,
              GridKind.RATIO: 2, GridKind.SDF: 3}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}
_HEADER = struct.Struct("<4sIB d 3d d Q")
_CHUNK_HEAD = struct.Struct("<3i")
_CHUNK_VALUES = CHUNK ** 3


def save_grid(grid: SparseGrid, path) -> None:
    keys = grid.sorted_keys()
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, _KIND_CODE[grid.kind],
                              grid.voxel_size, *grid.origin.tolist(),
                              grid.band_width, len(keys)))
        for key in keys:
            fh.write(_CHUNK_HEAD.pack(*key))
            fh.write(grid.chunks[key].astype("<f4").tobytes())


def load_grid(path) -> SparseGrid:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size or data[:4] != _MAGIC:
        raise VolumeFormatError(f"{path}: not a CIGD grid file")
    magic, version, kind_code, h, ox, oy, oz, band, count = _HEADER.unpack_from(data, 0)
    if version != _VERSION:
        raise VolumeFormatError(f"{path}: unsupported CIGD version {version}")
    if kind_code not in _CODE_KIND:
        raise VolumeFormatError(f"{path}: unknown grid kind {kind_code}")
    kind = _CODE_KIND[kind_code]
    record = _CHUNK_HEAD.size + 4 * _CHUNK_VALUES
    expected = _HEADER.size + count * record
    if len(data) != expected:
        raise VolumeFormatError(
            f"{path}: truncated grid file ({len(data)} bytes, expected {expected})")
    chunks = {}
    offset = _HEADER.size
    for _ in range(count):
        key = _CHUNK_HEAD.unpack_from(data, offset)
        offset += _CHUNK_HEAD.size
        values = np.frombuffer(data, dtype="<f4", count=_CHUNK_VALUES,
                               offset=offset).astype(np.float64)
        offset += 4 * _CHUNK_VALUES
        chunks[key] = values.reshape(CHUNK, CHUNK, CHUNK)
    return SparseGrid(h, np.array([ox, oy, oz]), kind, chunks, band)
