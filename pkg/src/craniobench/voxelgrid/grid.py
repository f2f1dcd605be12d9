"""Chunked sparse voxel grid over a uniform millimeter lattice.

Voxel index i covers the cube [origin + i*h, origin + (i+1)*h); its center
sits at origin + (i + 0.5) * h. Chunks are dense 16^3 blocks keyed by
chunk coordinate; voxels in absent chunks take the kind's background value
(0 for occupancy/count/ratio, +band_width for SDF).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

CHUNK = 16


class GridKind(enum.Enum):
    OCCUPANCY = "occupancy"
    COUNT = "count"
    RATIO = "ratio"
    SDF = "sdf"


def split_index(indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Global voxel indices -> (chunk coords, local coords)."""
    indices = np.asarray(indices, dtype=np.int64)
    return indices >> 4, indices & 15


@dataclass
class SparseGrid:
    voxel_size: float
    origin: np.ndarray
    kind: GridKind
    chunks: dict[tuple[int, int, int], np.ndarray] = field(default_factory=dict)
    band_width: float = 0.0

    def __post_init__(self):
        if not (self.voxel_size > 0):
            raise ValueError(f"voxel size must be > 0, got {self.voxel_size}")
        if self.kind is GridKind.SDF and not (self.band_width > 0):
            raise ValueError("SDF grids need band_width > 0")
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3).copy()
        self.origin.flags.writeable = False
        self._prune()

    @property
    def background(self) -> float:
        return self.band_width if self.kind is GridKind.SDF else 0.0

    def _prune(self) -> None:
        bg = self.background
        dead = [k for k, block in self.chunks.items() if np.all(block == bg)]
        for k in dead:
            del self.chunks[k]

    # ---- frame helpers -------------------------------------------------

    def voxel_center(self, indices: np.ndarray) -> np.ndarray:
        return self.origin + (np.asarray(indices, dtype=np.float64) + 0.5) * self.voxel_size

    def index_of(self, points: np.ndarray) -> np.ndarray:
        return np.floor((np.asarray(points, dtype=np.float64) - self.origin)
                        / self.voxel_size).astype(np.int64)

    def same_lattice(self, other: "SparseGrid", tol: float = 1e-6) -> bool:
        if abs(self.voxel_size - other.voxel_size) > tol * self.voxel_size:
            return False
        shift = (other.origin - self.origin) / self.voxel_size
        return bool(np.abs(shift - np.round(shift)).max() <= tol)

    def lattice_offset_to(self, other: "SparseGrid") -> np.ndarray:
        """Integer voxel offset mapping this grid's indices into `other`'s."""
        shift = (self.origin - other.origin) / self.voxel_size
        return np.round(shift).astype(np.int64)

    # ---- contents ------------------------------------------------------

    def sorted_keys(self) -> list[tuple[int, int, int]]:
        return sorted(self.chunks.keys())

    def value_at(self, indices: np.ndarray) -> np.ndarray:
        """Values at global voxel indices; background where absent."""
        indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        out = np.full(len(indices), self.background, dtype=np.float64)
        if not self.chunks or not len(indices):
            return out
        keys, local = split_index(indices)
        order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
        sk = keys[order]
        boundary = np.ones(len(sk), dtype=bool)
        boundary[1:] = np.any(sk[1:] != sk[:-1], axis=1)
        starts = np.flatnonzero(boundary)
        ends = np.append(starts[1:], len(sk))
        for s, e in zip(starts, ends):
            key = tuple(int(x) for x in sk[s])
            block = self.chunks.get(key)
            if block is None:
                continue
            rows = order[s:e]
            loc = local[rows]
            out[rows] = block[loc[:, 0], loc[:, 1], loc[:, 2]]
        return out

    def nonbackground_indices(self) -> np.ndarray:
        """(N,3) global indices of voxels whose value differs from background."""
        bg = self.background
        parts = []
        for key in self.sorted_keys():
            block = self.chunks[key]
            li = np.argwhere(block != bg)
            if len(li):
                parts.append(li + np.asarray(key, dtype=np.int64) * CHUNK)
        if not parts:
            return np.zeros((0, 3), dtype=np.int64)
        return np.concatenate(parts)

    def active_indices(self) -> np.ndarray:
        """Occupied voxel indices (occupancy/count/ratio: nonzero; SDF: value < 0)."""
        if self.kind is not GridKind.SDF:
            return self.nonbackground_indices()
        parts = []
        for key in self.sorted_keys():
            block = self.chunks[key]
            li = np.argwhere(block < 0)
            if len(li):
                parts.append(li + np.asarray(key, dtype=np.int64) * CHUNK)
        if not parts:
            return np.zeros((0, 3), dtype=np.int64)
        return np.concatenate(parts)

    def active_count(self) -> int:
        if self.kind is not GridKind.SDF:
            return int(sum((block != 0).sum() for block in self.chunks.values()))
        return int(sum((block < 0).sum() for block in self.chunks.values()))

    @property
    def is_empty(self) -> bool:
        return not self.chunks

    # ---- conversions ---------------------------------------------------

    @classmethod
    def from_indices(cls, indices: np.ndarray, values: np.ndarray, voxel_size: float,
                     origin, kind: GridKind, band_width: float = 0.0) -> "SparseGrid":
        grid = cls(voxel_size, origin, kind, {}, band_width)
        indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        values = np.broadcast_to(np.asarray(values, dtype=np.float64), (len(indices),))
        if not len(indices):
            return grid
        keys, local = split_index(indices)
        order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
        sk, sl, sv = keys[order], local[order], values[order]
        boundary = np.ones(len(sk), dtype=bool)
        boundary[1:] = np.any(sk[1:] != sk[:-1], axis=1)
        starts = np.flatnonzero(boundary)
        ends = np.append(starts[1:], len(sk))
        bg = grid.background
        for s, e in zip(starts, ends):
            key = tuple(int(x) for x in sk[s])
            block = np.full((CHUNK, CHUNK, CHUNK), bg, dtype=np.float64)
            loc = sl[s:e]
            block[loc[:, 0], loc[:, 1], loc[:, 2]] = sv[s:e]
            grid.chunks[key] = block
        grid._prune()
        return grid

    @classmethod
    def from_dense(cls, dense: np.ndarray, index_min, voxel_size: float, origin,
                   kind: GridKind, band_width: float = 0.0) -> "SparseGrid":
        """Sparsify a dense block whose [0,0,0] corner is global voxel index_min."""
        grid = cls(voxel_size, origin, kind, {}, band_width)
        dense = np.asarray(dense, dtype=np.float64)
        if dense.size == 0:
            return grid
        index_min = np.asarray(index_min, dtype=np.int64).reshape(3)
        bg = grid.background
        lo_chunk = index_min >> 4
        hi_chunk = (index_min + dense.shape - 1) >> 4
        for cx in range(lo_chunk[0], hi_chunk[0] + 1):
            for cy in range(lo_chunk[1], hi_chunk[1] + 1):
                for cz in range(lo_chunk[2], hi_chunk[2] + 1):
                    cmin = np.array([cx, cy, cz], dtype=np.int64) * CHUNK
                    src_lo = np.maximum(cmin - index_min, 0)
                    src_hi = np.minimum(cmin + CHUNK - index_min, dense.shape)
                    if (src_hi <= src_lo).any():
                        continue
                    sub = dense[src_lo[0]:src_hi[0], src_lo[1]:src_hi[1], src_lo[2]:src_hi[2]]
                    if np.all(sub == bg):
                        continue
                    block = np.full((CHUNK, CHUNK, CHUNK), bg, dtype=np.float64)
                    dst_lo = src_lo + index_min - cmin
                    dst_hi = dst_lo + (src_hi - src_lo)
                    block[dst_lo[0]:dst_hi[0], dst_lo[1]:dst_hi[1], dst_lo[2]:dst_hi[2]] = sub
                    grid.chunks[(cx, cy, cz)] = block
        return grid

    def to_dense(self, pad: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Densify the stored-chunk bounding box (plus `pad` background voxels).

        Returns (dense, index_min) where dense[0,0,0] is global voxel index_min.
        """
        if not self.chunks:
            return (np.zeros((0, 0, 0), dtype=np.float64), np.zeros(3, dtype=np.int64))
        keys = np.array(self.sorted_keys(), dtype=np.int64)
        lo = keys.min(axis=0) * CHUNK - pad
        hi = (keys.max(axis=0) + 1) * CHUNK + pad
        dense = np.full(tuple(hi - lo), self.background, dtype=np.float64)
        for key in self.sorted_keys():
            cmin = np.asarray(key, dtype=np.int64) * CHUNK - lo
            dense[cmin[0]:cmin[0] + CHUNK, cmin[1]:cmin[1] + CHUNK,
                  cmin[2]:cmin[2] + CHUNK] = self.chunks[key]
        return dense, lo

    def shifted(self, offset_voxels) -> "SparseGrid":
        """Same values on a lattice translated by an integer voxel offset."""
        offset = np.asarray(offset_voxels, dtype=np.int64).reshape(3)
        if np.all(offset == 0):
            return self.copy()
        idx = self.nonbackground_indices()
        vals = self.value_at(idx)
        return SparseGrid.from_indices(idx + offset, vals, self.voxel_size,
                                       self.origin - offset * self.voxel_size,
                                       self.kind, self.band_width)

    def copy(self) -> "SparseGrid":
        return SparseGrid(self.voxel_size, self.origin, self.kind,
                          {k: v.copy() for k, v in self.chunks.items()}, self.band_width)

    def allclose(self, other: "SparseGrid", atol: float = 0.0) -> bool:
        if (self.kind is not other.kind or not self.same_lattice(other)
                or not np.allclose(self.origin, other.origin, atol=1e-9)):
            return False
        keys = set(self.chunks) | set(other.chunks)
        bg = self.background
        blank = np.full((CHUNK, CHUNK, CHUNK), bg)
        for k in keys:
            a = self.chunks.get(k, blank)
            b = other.chunks.get(k, blank)
            if atol == 0.0:
                if not np.array_equal(a, b):
                    return False
            elif not np.allclose(a, b, atol=atol):
                return False
        return True
