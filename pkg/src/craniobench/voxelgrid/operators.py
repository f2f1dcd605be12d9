"""Grid operators for reconstruction cleanup: segment, filter, smooth."""

from __future__ import annotations

import enum

import numpy as np
from scipy import ndimage

from .grid import GridKind, SparseGrid
from .sdf import sdf_to_occupancy


class SmoothKind(enum.Enum):
    GAUSSIAN = "gaussian"
    MEAN = "mean"
    MEDIAN = "median"


def op_segment(g: SparseGrid) -> list[SparseGrid]:
    """Split occupancy into 6-connected islands.

    Ordered by active-voxel count descending; ties by the smallest voxel
    coordinate (lexicographic). The outputs partition the input.
    """
    if g.kind is not GridKind.OCCUPANCY:
        raise ValueError("op_segment expects an occupancy grid")
    if g.is_empty:
        return []
    dense, lo = g.to_dense()
    mask = dense != 0
    structure = ndimage.generate_binary_structure(3, 1)  # 6-connectivity
    labels, count = ndimage.label(mask, structure=structure)
    comps = []
    for lab in range(1, count + 1):
        idx = np.argwhere(labels == lab) + lo
        order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
        idx = idx[order]
        comps.append((len(idx), tuple(idx[0]), idx))
    comps.sort(key=lambda c: (-c[0], c[1]))
    return [SparseGrid.from_indices(idx, 1.0, g.voxel_size, g.origin,
                                    GridKind.OCCUPANCY)
            for _, _, idx in comps]


def op_filter(grids: list[SparseGrid], first_n: int) -> list[SparseGrid]:
    """Keep the first n grids of the input order."""
    if first_n < 0:
        raise ValueError("first_n must be >= 0")
    return list(grids[:first_n])


def op_smooth(g: SparseGrid, kind: SmoothKind, width_voxels: int = 3,
              iterations: int = 1) -> SparseGrid:
    """Separable level-set smoothing over the narrow band.

    Occupancy inputs are lifted to a pseudo-SDF, smoothed, and re-thresholded
    at zero; SDF inputs stay SDF with the band re-clamped. The median kind is
    a sequential per-axis median (the usual separable approximation).
    """
    if width_voxels < 1:
        raise ValueError("smoothing width must be at least 1 voxel")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if iterations == 0:
        return g.copy()
    if g.kind is GridKind.OCCUPANCY:
        sdf = _occupancy_to_pseudo_sdf(g)
        smoothed = op_smooth(sdf, kind, width_voxels, iterations)
        return sdf_to_occupancy(smoothed)
    if g.kind is not GridKind.SDF:
        raise ValueError("op_smooth expects an occupancy or SDF grid")
    if g.is_empty:
        return g.copy()

    band = g.band_width
    dense, lo = g.to_dense(pad=width_voxels)
    size = 2 * (int(width_voxels) // 2) + 1  # odd kernel width
    for _ in range(iterations):
        if kind is SmoothKind.GAUSSIAN:
            dense = ndimage.gaussian_filter(dense, sigma=width_voxels / 2.0,
                                            mode="nearest")
        elif kind is SmoothKind.MEAN:
            dense = ndimage.uniform_filter(dense, size=size, mode="nearest")
        elif kind is SmoothKind.MEDIAN:
            for axis in range(3):
                shape = [1, 1, 1]
                shape[axis] = size
                dense = ndimage.median_filter(dense, size=tuple(shape),
                                              mode="nearest")
        else:
            raise ValueError(f"unknown smoothing kind {kind}")
    np.clip(dense, -band, band, out=dense)
    return SparseGrid.from_dense(dense, lo, g.voxel_size, g.origin,
                                 GridKind.SDF, band)


def _occupancy_to_pseudo_sdf(g: SparseGrid) -> SparseGrid:
    """Signed center-to-surface estimate: +-0.5h at the first layer, grown
    by the Euclidean distance transform on both sides."""
    h = g.voxel_size
    band = 4.0 * h
    if g.is_empty:
        return SparseGrid(h, g.origin, GridKind.SDF, {}, band)
    dense, lo = g.to_dense(pad=2)
    mask = dense != 0
    d_out = ndimage.distance_transform_edt(~mask)
    d_in = ndimage.distance_transform_edt(mask)
    sdf = np.where(mask, -(d_in - 0.5) * h, (d_out - 0.5) * h)
    np.clip(sdf, -band, band, out=sdf)
    return SparseGrid.from_dense(sdf, lo, h, g.origin, GridKind.SDF, band)
