from .transforms import RigidTransform, RoiSphere
from .mesh import TriMesh, transform_mesh, clip_by_sphere, vertex_normals
from .meshio import load_mesh, save_mesh
from .nrrdio import LabelVolume, load_nrrd
from .synthetic import SyntheticParams, SyntheticCase, make_synthetic_case, make_shell_mesh

__all__ = [
    "RigidTransform",
    "RoiSphere",
    "TriMesh",
    "transform_mesh",
    "clip_by_sphere",
    "vertex_normals",
    "load_mesh",
    "save_mesh",
    "LabelVolume",
    "load_nrrd",
    "SyntheticParams",
    "SyntheticCase",
    "make_synthetic_case",
    "make_shell_mesh",
]
