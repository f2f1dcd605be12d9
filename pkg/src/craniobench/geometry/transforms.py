"""Rigid transforms and the spherical region-of-interest primitive."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateGeometryError

_ORTHO_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion: p -> rotation @ p + translation (millimeters).

    The rotation must be orthonormal with determinant +1; construction
    validates this so downstream code never sees a reflection.
    """

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        err = np.abs(r @ r.T - np.eye(3)).max()
        if err > 1e-6:
            raise ValueError(f"rotation is not orthonormal (|R R^T - I| = {err:.3g})")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation has determinant -1 (reflection)")
        if err > _ORTHO_TOL:
            r = orthonormalize(r)
        object.__setattr__(self, "rotation", _freeze(r))
        object.__setattr__(self, "translation", _freeze(t))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_axis_angle(cls, axis, angle_rad: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        axis = np.asarray(axis, dtype=np.float64)
        n = np.linalg.norm(axis)
        if n == 0:
            raise ValueError("axis must be nonzero")
        return cls(_rodrigues(axis / n * angle_rad), np.asarray(translation, dtype=np.float64))

    @classmethod
    def from_rotation_vector(cls, rvec, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(_rodrigues(np.asarray(rvec, dtype=np.float64)), np.asarray(translation, dtype=np.float64))

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def apply_normals(self, normals: np.ndarray) -> np.ndarray:
        return np.asarray(normals, dtype=np.float64) @ self.rotation.T

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return self ∘ other (other is applied first)."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def allclose(self, other: "RigidTransform", atol: float = 1e-9) -> bool:
        return (np.allclose(self.rotation, other.rotation, atol=atol)
                and np.allclose(self.translation, other.translation, atol=atol))


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto the closest proper rotation (SVD)."""
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    if d == 0:
        raise DegenerateGeometryError("cannot orthonormalize a singular matrix")
    return u @ np.diag([1.0, 1.0, d]) @ vt


def _rodrigues(rvec: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(rvec)
    if theta < 1e-300:
        return np.eye(3)
    k = rvec / theta
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(theta) * kx + (1 - np.cos(theta)) * (kx @ kx)


@dataclass(frozen=True)
class RoiSphere:
    """User-placed sphere bounding the defect area; radius in mm."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        if not np.isfinite(c).all():
            raise ValueError("sphere center must be finite")
        if not (self.radius > 0):
            raise ValueError(f"sphere radius must be > 0, got {self.radius}")
        object.__setattr__(self, "center", _freeze(c))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(np.asarray(points, dtype=np.float64) - self.center, axis=-1)
        return d <= self.radius
