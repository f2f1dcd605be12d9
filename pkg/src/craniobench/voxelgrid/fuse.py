"""Voxel-space fusion: occupancy ratios, thresholding, target offset, CSG."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import LatticeMismatchError
from ..geometry.transforms import RoiSphere
from .grid import CHUNK, GridKind, SparseGrid


@dataclass(frozen=True)
class OffsetField:
    """Spatially varying surface offset: base_offset (mm) scaled by a weight
    that falls to zero at each border marker and back to one `falloff` mm
    away from it."""

    base_offset: float
    border_markers: tuple[RoiSphere, ...] = field(default_factory=tuple)
    falloff: float = 5.0

    def __post_init__(self):
        if self.base_offset < 0:
            raise ValueError("base offset must be >= 0")
        if not (self.falloff > 0):
            raise ValueError("falloff must be > 0")
        object.__setattr__(self, "border_markers", tuple(self.border_markers))

    def weights(self, points: np.ndarray) -> np.ndarray:
        """clamp(distance to nearest marker ball / falloff, 0, 1); 1 without markers."""
        points = np.asarray(points, dtype=np.float64)
        if not self.border_markers:
            return np.ones(points.shape[:-1])
        d = np.full(points.shape[:-1], np.inf)
        for m in self.border_markers:
            to_ball = np.linalg.norm(points - m.center, axis=-1) - m.radius
            d = np.minimum(d, np.maximum(to_ball, 0.0))
        return np.clip(d / self.falloff, 0.0, 1.0)


def accumulate_ratio(grids: list[SparseGrid], origin=None) -> SparseGrid:
    """Per-voxel fraction of input occupancy grids that are active.

    All grids must share the voxel size; origins are snapped onto the common
    lattice (reference: `origin` or the first grid's).
    """
    if not grids:
        raise ValueError("accumulate_ratio needs at least one grid")
    h = grids[0].voxel_size
    for g in grids:
        if g.kind is not GridKind.OCCUPANCY:
            raise ValueError("accumulate_ratio expects occupancy grids")
        if abs(g.voxel_size - h) > 1e-9 * h:
            raise LatticeMismatchError(
                f"mismatched voxel sizes: {g.voxel_size} vs {h}")
    ref_origin = np.asarray(origin if origin is not None else grids[0].origin,
                            dtype=np.float64)
    m = len(grids)
    parts = []
    for g in grids:
        shift = np.round((g.origin - ref_origin) / h).astype(np.int64)
        idx = g.active_indices()
        if len(idx):
            parts.append(idx + shift)
    if not parts:
        return SparseGrid(h, ref_origin, GridKind.RATIO, {})
    allidx = np.concatenate(parts)
    uniq, counts = np.unique(allidx, axis=0, return_counts=True)
    return SparseGrid.from_indices(uniq, counts / m, h, ref_origin, GridKind.RATIO)


def threshold_extract(g: SparseGrid, threshold: float) -> SparseGrid:
    """Active iff ratio strictly exceeds the threshold."""
    if g.kind is not GridKind.RATIO:
        raise ValueError("threshold_extract expects a ratio grid")
    if not (0.0 <= threshold < 1.0):
        raise ValueError(f"threshold must be in [0, 1), got {threshold}")
    chunks = {}
    for key in g.sorted_keys():
        mask = g.chunks[key] > threshold
        if mask.any():
            chunks[key] = mask.astype(np.float64)
    return SparseGrid(g.voxel_size, g.origin, GridKind.OCCUPANCY, chunks)


def offset_surface(target: SparseGrid, f: OffsetField) -> SparseGrid:
    """Shift the zero isosurface outward by base_offset, weighted to zero
    around the border markers. Realized as an SDF iso-offset."""
    if target.kind is not GridKind.SDF:
        raise ValueError("offset_surface expects an SDF grid")
    o = f.base_offset
    if o >= target.band_width:
        raise ValueError(
            f"offset {o} mm exceeds the representable band ({target.band_width} mm)")
    if o == 0.0:
        return target.copy()
    band = target.band_width
    out = {}
    for key in target.sorted_keys():
        block = target.chunks[key]
        base = np.asarray(key, dtype=np.int64) * CHUNK
        li = np.stack(np.meshgrid(np.arange(CHUNK), np.arange(CHUNK),
                                  np.arange(CHUNK), indexing="ij"), axis=-1)
        centers = target.voxel_center(base + li)
        w = f.weights(centers)
        out[key] = np.clip(block - o * w, -band, band)
    return SparseGrid(target.voxel_size, target.origin, GridKind.SDF, out, band)


def subtract(recon: SparseGrid, target_offset: SparseGrid) -> SparseGrid:
    """Remove reconstruction voxels that lie inside the (offset) target.

    Active iff recon is active and the target SDF at the voxel is >= 0.
    """
    if recon.kind is not GridKind.OCCUPANCY:
        raise ValueError("subtract expects an occupancy reconstruction")
    if target_offset.kind is not GridKind.SDF:
        raise ValueError("subtract expects an SDF target")
    if not recon.same_lattice(target_offset):
        raise LatticeMismatchError(
            "reconstruction and target grids are not on the same lattice")
    idx = recon.active_indices()
    if not len(idx):
        return SparseGrid(recon.voxel_size, recon.origin, GridKind.OCCUPANCY, {})
    shift = recon.lattice_offset_to(target_offset)
    sdf_vals = target_offset.value_at(idx + shift)
    keep = idx[sdf_vals >= 0]
    return SparseGrid.from_indices(keep, 1.0, recon.voxel_size, recon.origin,
                                   GridKind.OCCUPANCY)
