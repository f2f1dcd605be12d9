"""Dataset repository: per-case mesh, occupancy grid, and descriptor cache.

Layout: <repo>/<case_id>/{mesh.stl, grid.cigd, gasd.f32} with a content-hash
manifest at the repo root so unchanged inputs are never rewritten.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CranioError
from ..geometry.mesh import TriMesh
from ..geometry.meshio import load_mesh, save_mesh
from ..geometry.nrrdio import load_nrrd
from ..registration.gasd import GasdDescriptor, gasd_descriptor
from ..registration.select import TemplateEntry
from ..voxelgrid.extract import extract_mesh
from ..voxelgrid.gridio import load_grid, save_grid
from ..voxelgrid.sdf import labels_to_occupancy, mesh_to_sdf, sdf_to_occupancy

MANIFEST_NAME = "cache_manifest.json"
_MESH_SUFFIXES = (".stl", ".ply")


@dataclass
class CaseRecord:
    case_id: str
    mesh_path: Path
    grid_path: Path
    gasd_path: Path
    ground_truth_path: Path | None = None

    def load_mesh(self) -> TriMesh:
        return load_mesh(self.mesh_path)

    def load_grid(self):
        return load_grid(self.grid_path)

    def load_descriptor(self) -> GasdDescriptor:
        raw = np.fromfile(self.gasd_path, dtype="<f4")
        return GasdDescriptor(raw.astype(np.float64))

    def load_ground_truth(self) -> TriMesh | None:
        if self.ground_truth_path is None:
            return None
        return load_mesh(self.ground_truth_path)

    @property
    def has_ground_truth(self) -> bool:
        return self.ground_truth_path is not None


@dataclass
class Repository:
    root: Path
    cases: dict[str, CaseRecord] = field(default_factory=dict)
    skipped: dict[str, str] = field(default_factory=dict)

    @classmethod
    def open(cls, root) -> "Repository":
        root = Path(root)
        manifest_path = root / MANIFEST_NAME
        if not manifest_path.exists():
            raise CranioError(f"no cache manifest at {manifest_path}; run build_cache first")
        manifest = json.loads(manifest_path.read_text())
        repo = cls(root=root)
        for case_id, entry in sorted(manifest.get("cases", {}).items()):
            gt = entry.get("ground_truth")
            repo.cases[case_id] = CaseRecord(
                case_id=case_id,
                mesh_path=root / case_id / "mesh.stl",
                grid_path=root / case_id / "grid.cigd",
                gasd_path=root / case_id / "gasd.f32",
                ground_truth_path=Path(gt) if gt else None,
            )
        repo.skipped = dict(manifest.get("skipped", {}))
        return repo

    def case(self, case_id: str) -> CaseRecord:
        if case_id not in self.cases:
            raise KeyError(f"unknown case '{case_id}'")
        return self.cases[case_id]

    def template_entries(self, exclude: str | None = None) -> list[TemplateEntry]:
        entries = []
        for case_id in sorted(self.cases):
            if case_id == exclude:
                continue
            record = self.cases[case_id]
            entries.append(TemplateEntry(case_id=case_id, mesh=record.load_mesh(),
                                         descriptor=record.load_descriptor()))
        return entries


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def build_cache(dataset_dir, repo_dir=None, voxel_size: float = 0.5) -> Repository:
    """Scan a dataset directory and populate the cache repository.

    Accepts NRRD label volumes and STL/PLY meshes; a file named
    '<case>.gt.stl' attaches as that case's ground-truth implant.
    Idempotent: cases whose input hash is unchanged are not rewritten;
    unreadable cases are recorded as skipped and the build continues.
    """
    dataset_dir = Path(dataset_dir)
    root = Path(repo_dir) if repo_dir is not None else dataset_dir / "cache"
    root.mkdir(parents=True, exist_ok=True)
    manifest_path = root / MANIFEST_NAME
    old = {}
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text()).get("cases", {})

    inputs: dict[str, Path] = {}
    truths: dict[str, Path] = {}
    for path in sorted(dataset_dir.iterdir()):
        if not path.is_file():
            continue
        name = path.name.lower()
        if name.endswith(".gt.stl") or name.endswith(".gt.ply"):
            truths[path.name.rsplit(".", 2)[0]] = path
        elif path.suffix.lower() in _MESH_SUFFIXES or path.suffix.lower() == ".nrrd":
            inputs[path.stem] = path

    cases: dict[str, dict] = {}
    skipped: dict[str, str] = {}
    repo = Repository(root=root)
    for case_id, src in sorted(inputs.items()):
        case_dir = root / case_id
        out_mesh = case_dir / "mesh.stl"
        out_grid = case_dir / "grid.cigd"
        out_gasd = case_dir / "gasd.f32"
        try:
            input_sha = _sha256(src)
            prior = old.get(case_id)
            unchanged = (prior is not None and prior.get("input_sha256") == input_sha
                         and out_mesh.exists() and out_grid.exists() and out_gasd.exists())
            if not unchanged:
                mesh, grid = _ingest(src, voxel_size)
                case_dir.mkdir(parents=True, exist_ok=True)
                save_mesh(mesh, out_mesh)
                save_grid(grid, out_grid)
                gasd_descriptor(mesh).values.astype("<f4").tofile(out_gasd)
            gt = truths.get(case_id)
            cases[case_id] = {
                "input": str(src),
                "input_sha256": input_sha,
                "outputs": {p.name: _sha256(p) for p in (out_mesh, out_grid, out_gasd)},
                "ground_truth": str(gt) if gt else None,
            }
            repo.cases[case_id] = CaseRecord(
                case_id=case_id, mesh_path=out_mesh, grid_path=out_grid,
                gasd_path=out_gasd, ground_truth_path=gt)
        except Exception as exc:  # record and continue with the next case
            skipped[case_id] = str(exc)

    manifest = {"version": 1, "voxel_size": voxel_size, "cases": cases,
                "skipped": skipped}
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    repo.skipped = skipped
    return repo


def _ingest(src: Path, voxel_size: float):
    if src.suffix.lower() == ".nrrd":
        volume = load_nrrd(src)
        grid = labels_to_occupancy(volume, float(volume.spacing[0]))
        mesh = extract_mesh(grid)
        return mesh, grid
    mesh = load_mesh(src)
    grid = sdf_to_occupancy(mesh_to_sdf(mesh, voxel_size, 2 * voxel_size))
    return mesh, grid
