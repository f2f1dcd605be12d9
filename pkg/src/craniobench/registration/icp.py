"""Iterative closest point alignment with optional ROI clipping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from ..errors import DegenerateGeometryError, EmptyRegionError
from ..geometry.mesh import TriMesh, clip_by_sphere, vertex_normals
from ..geometry.transforms import RigidTransform, RoiSphere
from .rigid import Objective, estimate_rigid


@dataclass(frozen=True)
class IcpSettings:
    objective: Objective = Objective.SYMMETRIC
    max_iterations: int = 50
    mse_threshold: float = 1e-4          # mm^2
    mse_delta_threshold: float = 1e-7    # mm^2
    max_correspondence_distance: float = 10.0  # mm
    normal_compat_min_cos: float = 0.5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.mse_threshold < 0 or self.mse_delta_threshold < 0:
            raise ValueError("thresholds must be >= 0")
        if not (-1.0 <= self.normal_compat_min_cos <= 1.0):
            raise ValueError("normal_compat_min_cos must lie in [-1, 1]")


@dataclass
class AlignmentResult:
    transform: RigidTransform
    fitness_mse: float   # mean squared inlier correspondence distance, mm^2
    iterations: int
    converged: bool
    mse_history: list[float] = field(default_factory=list)


def icp_align(moving: TriMesh, fixed: TriMesh, roi: RoiSphere | None = None,
              settings: IcpSettings | None = None,
              on_iteration: Callable[[int, RigidTransform, float], None] | None = None,
              ) -> AlignmentResult:
    """Align `moving` onto `fixed`; the returned transform applies to the
    full moving mesh even when the correspondence search was ROI-clipped.

    Stops once the inlier MSE or its per-iteration change drops below the
    thresholds; `converged` is False when only the iteration cap stopped it.
    """
    settings = settings or IcpSettings()
    if moving.is_empty or fixed.is_empty:
        raise EmptyRegionError("icp_align needs nonempty meshes")
    if roi is not None:
        moving_sub = clip_by_sphere(moving, roi)
        fixed_sub = clip_by_sphere(fixed, roi)
        if moving_sub.is_empty or fixed_sub.is_empty:
            raise EmptyRegionError("ROI excludes all geometry")
    else:
        moving_sub, fixed_sub = moving, fixed

    fixed_pts = fixed_sub.vertices
    fixed_nrm = fixed_sub.normals if fixed_sub.normals is not None else vertex_normals(fixed_sub)
    moving_pts = moving_sub.vertices
    moving_nrm = moving_sub.normals if moving_sub.normals is not None else vertex_normals(moving_sub)
    tree = cKDTree(fixed_pts)

    current = RigidTransform.identity()
    prev_mse: float | None = None
    converged = False
    steps = 0
    history: list[float] = []

    for it in range(settings.max_iterations):
        pts = current.apply(moving_pts)
        dist, idx = tree.query(pts)
        mask = dist <= settings.max_correspondence_distance
        if settings.normal_compat_min_cos > -1.0:
            nrm = current.apply_normals(moving_nrm)
            cos = np.einsum("ij,ij->i", nrm, fixed_nrm[idx])
            mask &= cos >= settings.normal_compat_min_cos
        if mask.sum() < 3:
            break
        mse = float(np.mean(dist[mask] ** 2))
        history.append(mse)
        if on_iteration is not None:
            on_iteration(it, current, mse)
        if mse < settings.mse_threshold:
            converged = True
            break
        if prev_mse is not None and abs(prev_mse - mse) < settings.mse_delta_threshold:
            converged = True
            break
        prev_mse = mse
        try:
            step = estimate_rigid(pts[mask], fixed_pts[idx[mask]],
                                  settings.objective,
                                  target_normals=fixed_nrm[idx[mask]],
                                  source_normals=current.apply_normals(moving_nrm)[mask])
        except DegenerateGeometryError:
            break
        current = step.compose(current)
        steps += 1

    fitness = _final_fitness(tree, current, moving_pts, moving_nrm,
                             fixed_nrm, settings)
    return AlignmentResult(transform=current, fitness_mse=fitness,
                           iterations=steps, converged=converged,
                           mse_history=history)


def _final_fitness(tree: cKDTree, current: RigidTransform, moving_pts,
                   moving_nrm, fixed_nrm, settings: IcpSettings) -> float:
    pts = current.apply(moving_pts)
    dist, idx = tree.query(pts)
    mask = dist <= settings.max_correspondence_distance
    if settings.normal_compat_min_cos > -1.0:
        nrm = current.apply_normals(moving_nrm)
        cos = np.einsum("ij,ij->i", nrm, fixed_nrm[idx])
        mask &= cos >= settings.normal_compat_min_cos
    if not mask.any():
        return float("inf")
    return float(np.mean(dist[mask] ** 2))
