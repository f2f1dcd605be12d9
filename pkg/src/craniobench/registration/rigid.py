"""Single-step rigid estimation from point correspondences."""

from __future__ import annotations

import enum

import numpy as np

from ..errors import DegenerateGeometryError
from ..geometry.transforms import RigidTransform, _rodrigues


class Objective(enum.Enum):
    POINT_TO_POINT = "point_to_point"
    POINT_TO_PLANE = "point_to_plane"
    SYMMETRIC = "symmetric"


def estimate_rigid(source: np.ndarray, target: np.ndarray,
                   objective: Objective = Objective.POINT_TO_POINT,
                   target_normals: np.ndarray | None = None,
                   source_normals: np.ndarray | None = None) -> RigidTransform:
    """Least-squares rigid fit mapping source points onto target points.

    POINT_TO_POINT uses the closed-form SVD solution (reflection corrected).
    POINT_TO_PLANE and SYMMETRIC solve the small-angle linearization and
    rebuild a proper rotation from the rotation vector; SYMMETRIC projects
    residuals on the summed source+target normals and splits the rotation
    between both clouds.
    """
    source = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    target = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if len(source) != len(target):
        raise ValueError("source and target must pair up")
    if len(source) < 3:
        raise DegenerateGeometryError(
            f"degenerate correspondences: need >= 3 pairs, got {len(source)}")

    if objective is Objective.POINT_TO_POINT:
        return _fit_point_to_point(source, target)
    if target_normals is None:
        raise ValueError(f"{objective.value} requires target normals")
    target_normals = np.asarray(target_normals, dtype=np.float64).reshape(-1, 3)
    if objective is Objective.POINT_TO_PLANE:
        return _fit_linearized(source, target, target_normals, symmetric=False)
    if objective is Objective.SYMMETRIC:
        if source_normals is None:
            raise ValueError("symmetric objective requires source normals")
        n = target_normals + np.asarray(source_normals, dtype=np.float64).reshape(-1, 3)
        return _fit_linearized(source, target, n, symmetric=True)
    raise ValueError(f"unknown objective {objective}")


def _fit_point_to_point(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    sc = source.mean(axis=0)
    tc = target.mean(axis=0)
    p = source - sc
    q = target - tc
    cov = p.T @ q
    u, s, vt = np.linalg.svd(cov)
    if s[1] <= max(s[0] * 1e-12, 1e-300):
        raise DegenerateGeometryError(
            "degenerate correspondences: points are collinear")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rot, tc - rot @ sc)


def _fit_linearized(source: np.ndarray, target: np.ndarray, normals: np.ndarray,
                    symmetric: bool) -> RigidTransform:
    lever = source + target if symmetric else source
    a = np.concatenate([np.cross(lever, normals), normals], axis=1)
    b = -np.einsum("ij,ij->i", source - target, normals)
    ata = a.T @ a
    sv = np.linalg.svd(ata, compute_uv=False)
    if sv[-1] <= sv[0] * 1e-12:
        raise DegenerateGeometryError(
            "degenerate correspondences: normal system is rank deficient")
    x = np.linalg.solve(ata, a.T @ b)
    rvec, trans = x[:3], x[3:]
    rot = _rodrigues(rvec)
    if symmetric:
        # the rotation applies to both clouds; fold into one moving transform
        return RigidTransform(rot @ rot, rot @ trans)
    return RigidTransform(rot, trans)
