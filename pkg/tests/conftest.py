import numpy as np
import pytest

from craniobench.geometry.mesh import TriMesh
from craniobench.geometry.meshio import save_mesh
from craniobench.geometry.synthetic import (SyntheticParams, icosphere,
                                            make_shell_mesh,
                                            make_synthetic_case)
from craniobench.pipeline.cache import build_cache


def tetrahedron() -> TriMesh:
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    faces = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], dtype=np.int32)
    return TriMesh(verts, faces)


def cube_soup() -> tuple[np.ndarray, np.ndarray]:
    """Unit cube as 12 triangles with 36 duplicated vertices."""
    corners = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)],
                       dtype=float)
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1),
        (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3),
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
    soup = corners[np.array(tris).reshape(-1)]
    faces = np.arange(36).reshape(-1, 3)
    return soup, faces


def sphere_mesh(radius: float = 10.0, subdivisions: int = 4) -> TriMesh:
    v, f = icosphere(subdivisions)
    return TriMesh(v * radius, f.astype(np.int32), v.copy())


@pytest.fixture(scope="session")
def unit_sphere() -> TriMesh:
    return sphere_mesh(1.0, 4)


@pytest.fixture(scope="session")
def shell5k() -> TriMesh:
    """The 5k-vertex bumpy shell used by the registration fixtures."""
    return make_shell_mesh((40, 34, 30), (36.5, 30.5, 26.5), 4, 0.04)


@pytest.fixture(scope="session")
def small_case():
    """Coarse synthetic case for fast integration tests."""
    return make_synthetic_case(SyntheticParams(
        seed=3, subdivisions=4, voxel_size=1.0))


@pytest.fixture(scope="session")
def standard_case():
    """The default-parameter fixture used by the acceptance runs."""
    return make_synthetic_case(SyntheticParams(seed=0))


def write_case_dataset(case, directory, with_truth: bool = True):
    directory.mkdir(parents=True, exist_ok=True)
    save_mesh(case.target, directory / "target.stl")
    if with_truth:
        save_mesh(case.ground_truth_implant, directory / "target.gt.stl")
    for i, template in enumerate(case.templates):
        save_mesh(template, directory / f"template_{i:02d}.stl")
    return directory


@pytest.fixture(scope="session")
def small_repo(small_case, tmp_path_factory):
    root = tmp_path_factory.mktemp("small_repo")
    data = write_case_dataset(small_case, root / "data")
    return build_cache(data, voxel_size=1.0)
