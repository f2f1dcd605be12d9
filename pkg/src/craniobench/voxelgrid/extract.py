"""Isosurface extraction from sparse grids (marching cubes)."""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from skimage import measure

from ..geometry.mesh import TriMesh, empty_mesh
from .grid import GridKind, SparseGrid


def extract_mesh(g: SparseGrid, iso: float = 0.0) -> TriMesh:
    """Triangulate the iso-surface of an SDF grid.

    Occupancy grids are lifted to a half-voxel pseudo-SDF on a 2x refined
    lattice first, so single voxels come out near their true cube extent.
    An empty iso-surface yields an empty mesh, not an error.
    """
    if g.kind is GridKind.OCCUPANCY:
        return _extract_occupancy(g, iso)
    if g.kind is not GridKind.SDF:
        raise ValueError("extract_mesh expects an SDF or occupancy grid")
    if abs(iso) >= g.band_width:
        raise ValueError(f"iso {iso} is outside the band (+-{g.band_width})")
    if g.is_empty:
        return empty_mesh()
    dense, lo = g.to_dense(pad=1)
    h = g.voxel_size
    corner = g.origin + (lo + 0.5) * h
    return _march(dense, iso, h, corner)


def _extract_occupancy(g: SparseGrid, iso: float) -> TriMesh:
    if g.is_empty:
        return empty_mesh()
    h = g.voxel_size
    if abs(iso) >= 0.5 * h:
        raise ValueError(f"iso {iso} is outside the pseudo-SDF band (+-{0.5 * h})")
    dense, lo = g.to_dense(pad=2)
    mask = dense != 0
    fine = mask.repeat(2, axis=0).repeat(2, axis=1).repeat(2, axis=2)
    h2 = 0.5 * h
    d_out = ndimage.distance_transform_edt(~fine)
    d_in = ndimage.distance_transform_edt(fine)
    pseudo = np.where(fine, -(d_in - 0.5) * h2, (d_out - 0.5) * h2)
    np.clip(pseudo, -4 * h, 4 * h, out=pseudo)
    corner = g.origin + lo * h + 0.5 * h2
    return _march(pseudo, iso, h2, corner)


def _march(dense: np.ndarray, iso: float, h: float, corner: np.ndarray) -> TriMesh:
    if dense.size == 0 or not (dense.min() < iso < dense.max()):
        return empty_mesh()
    verts, faces, _, _ = measure.marching_cubes(dense, level=iso,
                                                spacing=(h, h, h))
    if len(faces) == 0:
        return empty_mesh()
    world = corner + verts.astype(np.float64)
    return TriMesh(world, faces.astype(np.int32))
