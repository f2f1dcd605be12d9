"""Seeded synthetic cases: a defective two-shell "skull", intact template
shells under random rigid perturbations, and the matching ground-truth
implant. Gives acceptance tests a controllable ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import TriMesh, transform_mesh, vertex_normals
from .transforms import RigidTransform, RoiSphere


@dataclass(frozen=True)
class SyntheticParams:
    outer_radii: tuple[float, float, float] = (40.0, 34.0, 30.0)
    inner_radii: tuple[float, float, float] = (36.5, 30.5, 26.5)
    defect_radius: float = 16.0
    defect_direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    defect_lift: float = 0.6  # ball center raised above the surface, as a
    # fraction of the radius; steepens the cut walls like a punched-out piece
    template_count: int = 5
    max_rotation_deg: float = 5.0
    max_translation_mm: float = 3.0
    radius_jitter: float = 0.01
    shape_variation: float = 0.01
    bump_amplitude: float = 0.04
    seed: int = 0
    subdivisions: int = 5
    voxel_size: float = 0.5
    roi_margin: float = 16.0

    def __post_init__(self):
        outer = np.asarray(self.outer_radii, dtype=np.float64)
        inner = np.asarray(self.inner_radii, dtype=np.float64)
        if (inner >= outer).any():
            raise ValueError("inner radii must be strictly smaller than outer radii")
        if not (self.defect_radius > 0):
            raise ValueError("defect radius must be > 0")
        if self.template_count < 1:
            raise ValueError("need at least one template")


@dataclass(frozen=True)
class SyntheticCase:
    target: TriMesh
    templates: list[TriMesh]
    ground_truth_implant: TriMesh
    roi: RoiSphere
    defect: RoiSphere
    intact_shell: TriMesh
    params: SyntheticParams
    template_transforms: list[RigidTransform] = field(default_factory=list)
    border_markers: tuple[RoiSphere, ...] = ()


def icosphere(subdivisions: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Unit sphere by icosahedron subdivision; deterministic ordering."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)

    for _ in range(subdivisions):
        vlist = list(verts)
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            if key in cache:
                return cache[key]
            m = vlist[i] + vlist[j]
            m = m / np.linalg.norm(m)
            vlist.append(m)
            cache[key] = len(vlist) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.asarray(vlist)
        faces = np.asarray(new_faces, dtype=np.int64)
    return verts, faces


# fixed low-order harmonics give the shell skull-like curvature variation;
# without them an ellipsoid cap can slide tangentially during alignment
_BUMP_DIRS = np.array([
    [0.8165, 0.4082, 0.4082],
    [-0.2673, 0.8018, 0.5345],
    [0.4851, -0.4851, 0.7276],
])
_BUMP_FREQS = (9.0, 11.0, 13.0)
_BUMP_PHASES = (0.9, 2.1, 4.2)


def bump_field(directions: np.ndarray) -> np.ndarray:
    """Smooth deterministic modulation over unit directions, in [-1, 1]."""
    u = np.asarray(directions, dtype=np.float64)
    total = np.zeros(u.shape[:-1])
    for d, w, p in zip(_BUMP_DIRS, _BUMP_FREQS, _BUMP_PHASES):
        total = total + np.sin(w * (u @ d) + p)
    return total / 3.0


# lower-frequency harmonics for per-template anatomy variation: smooth
# enough that a local rigid fit can absorb most of the difference
_VARIATION_FREQS = (2.0, 2.6, 3.3)
_VARIATION_PHASES = (0.4, 1.5, 3.7)


def variation_field(directions: np.ndarray, amplitudes) -> np.ndarray:
    u = np.asarray(directions, dtype=np.float64)
    total = np.zeros(u.shape[:-1])
    for a, d, w, p in zip(amplitudes, _BUMP_DIRS, _VARIATION_FREQS,
                          _VARIATION_PHASES):
        total = total + a * np.sin(w * (u @ d) + p)
    return total


def make_shell_mesh(outer_radii, inner_radii, subdivisions: int = 5,
                    bump_amplitude: float = 0.0,
                    variation_amplitudes=(0.0, 0.0, 0.0)) -> TriMesh:
    """Closed two-surface shell: outward outer ellipsoid plus flipped inner
    one, optionally modulated by the deterministic bump field and a smooth
    per-instance variation field."""
    outer = np.asarray(outer_radii, dtype=np.float64)
    inner = np.asarray(inner_radii, dtype=np.float64)
    unit_v, unit_f = icosphere(subdivisions)
    factor = (1.0 + bump_amplitude * bump_field(unit_v)
              + variation_field(unit_v, variation_amplitudes))

    outer_v = unit_v * outer * factor[:, None]
    inner_v = unit_v * inner * factor[:, None]

    shift = len(outer_v)
    inner_f = unit_f[:, ::-1] + shift  # reversed winding: normals face the cavity
    verts = np.concatenate([outer_v, inner_v])
    faces = np.concatenate([unit_f, inner_f]).astype(np.int32)
    mesh = TriMesh(verts, faces)
    return TriMesh(verts, faces, vertex_normals(mesh))


def ellipsoid_pseudo_sdf(points: np.ndarray, radii: np.ndarray,
                         bump_amplitude: float = 0.0,
                         variation_amplitudes=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Signed field whose zero set is the modulated ellipsoid surface."""
    scaled = points / radii
    r = np.linalg.norm(scaled, axis=-1)
    factor = 1.0
    if bump_amplitude or any(variation_amplitudes):
        u = scaled / np.where(r > 1e-12, r, 1.0)[..., None]
        factor = (1.0 + bump_amplitude * bump_field(u)
                  + variation_field(u, variation_amplitudes))
    return (r / factor - 1.0) * radii.min()


def make_synthetic_case(params: SyntheticParams | None = None) -> SyntheticCase:
    """Build the seeded fixture; bit-identical outputs for a fixed seed."""
    from ..voxelgrid.extract import extract_mesh
    from ..voxelgrid.sdf import sdf_from_dense

    p = params or SyntheticParams()
    outer = np.asarray(p.outer_radii, dtype=np.float64)
    inner = np.asarray(p.inner_radii, dtype=np.float64)
    direction = np.asarray(p.defect_direction, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)

    rng = np.random.default_rng(p.seed)
    # the "patient" anatomy carries its own low-order component with a
    # guaranteed magnitude: the regime where border-local alignment matters
    target_var = (rng.choice([-1.0, 1.0], 3)
                  * rng.uniform(0.6, 1.0, 3) * p.shape_variation)

    surface_factor = float(1.0 + p.bump_amplitude * bump_field(direction)
                           + variation_field(direction, target_var))
    surface_point = outer * direction * surface_factor
    defect_center = surface_point + direction * (p.defect_lift * p.defect_radius)
    defect = RoiSphere(defect_center, p.defect_radius)
    roi = RoiSphere(defect_center, p.defect_radius + p.roi_margin)

    h = p.voxel_size
    band = 4.0 * h
    pad = 1.0 + p.bump_amplitude + p.shape_variation
    lo_w = np.minimum(-outer * pad, defect_center - p.defect_radius) - (band + 2 * h)
    hi_w = np.maximum(outer * pad, defect_center + p.defect_radius) + (band + 2 * h)
    origin = lo_w
    n = np.ceil((hi_w - lo_w) / h).astype(np.int64)
    axes = [origin[i] + (np.arange(n[i]) + 0.5) * h for i in range(3)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    f_outer = ellipsoid_pseudo_sdf(pts, outer, p.bump_amplitude, target_var)
    f_inner = ellipsoid_pseudo_sdf(pts, inner, p.bump_amplitude, target_var)
    f_shell = np.maximum(f_outer, -f_inner)
    f_ball = np.linalg.norm(pts - defect_center, axis=-1) - p.defect_radius
    # target = shell minus defect ball; implant = shell intersect defect ball
    f_target = np.maximum(f_shell, -f_ball)
    f_implant = np.maximum(f_shell, f_ball)

    target = extract_mesh(sdf_from_dense(f_target, (0, 0, 0), h, origin, band))
    implant = extract_mesh(sdf_from_dense(f_implant, (0, 0, 0), h, origin, band))
    intact = make_shell_mesh(outer, inner, p.subdivisions, p.bump_amplitude,
                             target_var)

    templates = []
    transforms = []
    for _ in range(p.template_count):
        jitter = 1.0 + rng.uniform(-p.radius_jitter, p.radius_jitter, 3)
        variation = rng.uniform(-p.shape_variation, p.shape_variation, 3)
        shell = make_shell_mesh(outer * jitter, inner * jitter, p.subdivisions,
                                p.bump_amplitude, variation)
        t = _random_rigid(rng, p.max_rotation_deg, p.max_translation_mm)
        templates.append(transform_mesh(shell, t))
        transforms.append(t)

    markers = _rim_markers(defect, direction, outer, p.bump_amplitude, target_var)
    return SyntheticCase(target=target, templates=templates,
                         ground_truth_implant=implant, roi=roi, defect=defect,
                         intact_shell=intact, params=p,
                         template_transforms=transforms,
                         border_markers=markers)


def _rim_markers(defect: RoiSphere, axis: np.ndarray, outer: np.ndarray,
                 bump_amplitude: float, variation, count: int = 8,
                 radius: float = 2.5) -> tuple[RoiSphere, ...]:
    """Small marker spheres along the defect rim (where the defect ball
    meets the outer surface), standing in for the user's border selection."""
    e1 = np.cross(axis, [0.0, 1.0, 0.0])
    if np.linalg.norm(e1) < 1e-6:
        e1 = np.cross(axis, [1.0, 0.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    markers = []
    for k in range(count):
        phi = 2.0 * np.pi * k / count
        lateral = np.cos(phi) * e1 + np.sin(phi) * e2
        point = _rim_point(defect, axis, lateral, outer, bump_amplitude, variation)
        if point is not None:
            markers.append(RoiSphere(point, radius))
    return tuple(markers)


def _rim_point(defect: RoiSphere, axis: np.ndarray, lateral: np.ndarray,
               outer: np.ndarray, bump_amplitude: float,
               variation) -> np.ndarray | None:
    """Bisect along the defect-ball surface for its crossing of the outer
    ellipsoid, in the plane spanned by the defect axis and `lateral`."""

    def value(t: float) -> float:
        direction = np.cos(t) * (-axis) + np.sin(t) * lateral
        return float(ellipsoid_pseudo_sdf(defect.center + defect.radius * direction,
                                          outer, bump_amplitude, variation))

    lo_t, hi_t = 0.0, np.pi / 2
    f_lo, f_hi = value(lo_t), value(hi_t)
    if f_lo * f_hi > 0:
        return None
    for _ in range(60):
        mid = 0.5 * (lo_t + hi_t)
        f_mid = value(mid)
        if f_lo * f_mid <= 0:
            hi_t = mid
        else:
            lo_t, f_lo = mid, f_mid
    t = 0.5 * (lo_t + hi_t)
    direction = np.cos(t) * (-axis) + np.sin(t) * lateral
    return defect.center + defect.radius * direction


def _random_rigid(rng: np.random.Generator, max_rot_deg: float,
                  max_trans_mm: float) -> RigidTransform:
    axis = rng.normal(size=3)
    norm = np.linalg.norm(axis)
    axis = axis / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
    angle = np.deg2rad(rng.uniform(0.0, max_rot_deg))
    direction = rng.normal(size=3)
    dn = np.linalg.norm(direction)
    direction = direction / dn if dn > 0 else np.array([1.0, 0.0, 0.0])
    translation = direction * rng.uniform(0.0, max_trans_mm)
    if angle == 0.0:
        return RigidTransform(np.eye(3), translation)
    return RigidTransform.from_axis_angle(axis, angle, translation)
