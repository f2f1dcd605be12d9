"""Indexed triangle meshes in millimeter world space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import OpenMeshError
from .transforms import RigidTransform, RoiSphere

WELD_TOLERANCE = 1e-5  # mm; below voxel scale, above float32 noise


@dataclass(frozen=True)
class TriMesh:
    """Triangle surface: vertices (N,3) float64 mm, triangles (M,3) int32.

    Normals are optional per-vertex unit vectors. Arrays are frozen after
    construction; operations return new meshes.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        if not np.isfinite(v).all():
            raise ValueError("vertex coordinates must be finite")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        n = self.normals
        if n is not None:
            n = np.ascontiguousarray(n, dtype=np.float64).reshape(-1, 3)
            if n.shape != v.shape:
                raise ValueError("normals must match vertex count")
            lengths = np.linalg.norm(n, axis=1)
            if n.size and np.abs(lengths - 1.0).max() > 1e-6:
                raise ValueError("normals must have unit length")
            n.flags.writeable = False
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", n)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.vertices) == 0:
            z = np.zeros(3)
            return z, z
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def with_normals(self) -> "TriMesh":
        if self.normals is not None:
            return self
        return TriMesh(self.vertices, self.triangles, vertex_normals(self))

    def triangle_corners(self) -> np.ndarray:
        """(M, 3, 3) corner positions."""
        return self.vertices[self.triangles]

    def boundary_edge_count(self) -> int:
        """Number of undirected edges not shared by exactly two triangles."""
        if self.is_empty:
            return 0
        e = np.concatenate([self.triangles[:, [0, 1]],
                            self.triangles[:, [1, 2]],
                            self.triangles[:, [2, 0]]])
        e = np.sort(e, axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        return int((counts != 2).sum())

    def is_closed(self) -> bool:
        return not self.is_empty and self.boundary_edge_count() == 0


def empty_mesh() -> TriMesh:
    return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32))


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """Area-weighted average of incident face normals (unit length).

    Accumulation runs in triangle-index order so results are reproducible.
    """
    v, t = mesh.vertices, mesh.triangles
    normals = np.zeros_like(v)
    if len(t):
        p = v[t]
        face = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])  # length = 2*area
        for k in range(3):
            np.add.at(normals, t[:, k], face)
    lengths = np.linalg.norm(normals, axis=1)
    safe = np.where(lengths > 1e-300, lengths, 1.0)
    out = normals / safe[:, None]
    # isolated vertices get an arbitrary but valid unit vector
    out[lengths <= 1e-300] = (0.0, 0.0, 1.0)
    return out


def transform_mesh(mesh: TriMesh, t: RigidTransform) -> TriMesh:
    """Map every vertex by R v + t; normals rotate by R."""
    verts = t.apply(mesh.vertices)
    normals = t.apply_normals(mesh.normals) if mesh.normals is not None else None
    return TriMesh(verts, mesh.triangles, normals)


def clip_by_sphere(mesh: TriMesh, roi: RoiSphere) -> TriMesh:
    """Keep triangles whose three vertices all lie inside the ROI sphere.

    Whole triangles only (no cutting at the sphere surface); unreferenced
    vertices are dropped. The result may be empty.
    """
    if mesh.is_empty:
        return empty_mesh()
    inside = roi.contains(mesh.vertices)
    keep = inside[mesh.triangles].all(axis=1)
    return _select_triangles(mesh, keep)


def _select_triangles(mesh: TriMesh, keep: np.ndarray) -> TriMesh:
    tris = mesh.triangles[keep]
    if len(tris) == 0:
        return empty_mesh()
    used, inverse = np.unique(tris, return_inverse=True)
    verts = mesh.vertices[used]
    normals = mesh.normals[used] if mesh.normals is not None else None
    return TriMesh(verts, inverse.reshape(-1, 3).astype(np.int32), normals)


def weld_vertices(positions: np.ndarray, triangles: np.ndarray,
                  tolerance: float = WELD_TOLERANCE) -> TriMesh:
    """Merge coincident vertices (within tolerance) of a triangle soup."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    keys = np.round(positions / tolerance).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    verts = positions[first]
    tris = inverse[np.asarray(triangles, dtype=np.int64)].astype(np.int32)
    # drop triangles that collapsed onto fewer than 3 distinct vertices
    ok = ((tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2])
          & (tris[:, 0] != tris[:, 2]))
    mesh = TriMesh(verts, tris[ok])
    return _drop_unreferenced(mesh)


def _drop_unreferenced(mesh: TriMesh) -> TriMesh:
    if mesh.is_empty:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32))
    used, inverse = np.unique(mesh.triangles, return_inverse=True)
    return TriMesh(mesh.vertices[used], inverse.reshape(-1, 3).astype(np.int32))


def require_closed(mesh: TriMesh, what: str) -> None:
    n = mesh.boundary_edge_count()
    if mesh.is_empty or n:
        raise OpenMeshError(
            f"{what} requires a closed mesh; found {n} non-manifold/boundary edges"
            if not mesh.is_empty else f"{what} requires a nonempty closed mesh")
