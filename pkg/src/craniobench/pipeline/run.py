"""End-to-end reconstruction, split into the five steerable stages.

The service executes stages one at a time against a ReconstructionRun; the
batch CLI runs them back to back. Both paths share this code so equal
configs yield byte-identical artifacts.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .. import __version__
from ..errors import StageError
from ..geometry.mesh import TriMesh, empty_mesh, transform_mesh
from ..geometry.meshio import mesh_to_stl_bytes, save_mesh
from ..geometry.transforms import RigidTransform
from ..metrics.distance import signed_distances
from ..metrics.report import MetricsReport, report as metrics_report
from ..registration.gasd import gasd_descriptor
from ..registration.icp import AlignmentResult, icp_align
from ..registration.select import SelectionMode
from ..voxelgrid.fuse import accumulate_ratio, offset_surface, subtract, threshold_extract
from ..voxelgrid.extract import extract_mesh
from ..voxelgrid.grid import GridKind, SparseGrid
from ..voxelgrid.operators import op_filter, op_segment, op_smooth
from ..voxelgrid.sdf import mesh_to_sdf, sdf_to_occupancy
from .cache import CaseRecord, Repository
from .config import PipelineConfig

STAGES = ("selection", "alignment", "fusion", "postprocess", "metrics")

ProgressFn = Callable[[str, float], None]


@dataclass
class RunManifest:
    config: dict
    target_case: str
    candidates: list[str]
    alignments: list[dict]
    timings_ms: dict[str, float]
    artifacts: dict[str, str]
    version: str = __version__

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "target_case": self.target_case,
            "candidates": self.candidates,
            "alignments": self.alignments,
            "timings_ms": self.timings_ms,
            "artifacts": self.artifacts,
            "version": self.version,
        }

    def comparable_dict(self) -> dict:
        """Manifest content with the run-dependent timings removed."""
        d = self.to_dict()
        d.pop("timings_ms")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


class ReconstructionRun:
    """Holds per-stage state; stages must execute in pipeline order.

    Voxelizations are memoized on (case, transform, h) so re-running fusion
    after a threshold change does not redo alignment-dependent work.
    """

    def __init__(self, config: PipelineConfig, target: CaseRecord,
                 repository: Repository):
        self.config = config
        self.target = target
        self.repository = repository
        self._target_mesh: TriMesh | None = None
        self.candidates: list[str] | None = None
        self.alignments: list[tuple[str, AlignmentResult]] | None = None
        self.ratio: SparseGrid | None = None
        self.recon: SparseGrid | None = None
        self.implant: TriMesh | None = None
        self.report: MetricsReport | None = None
        self.distances: np.ndarray | None = None
        self._occ_cache: dict = {}
        self._sdf_cache: dict = {}

    # -- helpers ---------------------------------------------------------

    @property
    def target_mesh(self) -> TriMesh:
        if self._target_mesh is None:
            self._target_mesh = self.target.load_mesh()
        return self._target_mesh

    def set_config(self, config: PipelineConfig, from_stage: str) -> None:
        """Swap in a new config and drop state from `from_stage` onward."""
        self.config = config
        idx = STAGES.index(from_stage)
        if idx <= STAGES.index("selection"):
            self.candidates = None
        if idx <= STAGES.index("alignment"):
            self.alignments = None
        if idx <= STAGES.index("fusion"):
            self.ratio = None
            self.recon = None
        if idx <= STAGES.index("postprocess"):
            self.implant = None
        if idx <= STAGES.index("metrics"):
            self.report = None
            self.distances = None

    def _target_sdf(self) -> SparseGrid:
        h = self.config.voxel_size
        band = max(2 * h, self.config.offset.base_offset + 2 * h)
        key = (h, band)
        if key not in self._sdf_cache:
            self._sdf_cache[key] = mesh_to_sdf(self.target_mesh, h, band)
        return self._sdf_cache[key]

    # -- stages ----------------------------------------------------------

    def run_selection(self, progress: ProgressFn | None = None) -> list[str]:
        library = self.repository.template_entries(exclude=self.target.case_id)
        if not library:
            raise StageError("selection", "repository has no template cases")
        sel = self.config.selection
        k = min(sel.k, len(library))
        if sel.mode is SelectionMode.GASD_TOP_K:
            try:
                target_desc = self.target.load_descriptor()
            except OSError:
                target_desc = gasd_descriptor(self.target_mesh)
            ranked = sorted(
                ((target_desc.distance(e.descriptor or gasd_descriptor(e.mesh)),
                  e.case_id) for e in library),
                key=lambda item: (item[0], item[1]))
            self.candidates = [cid for _, cid in ranked[:k]]
        else:
            self.candidates = [e.case_id for e in library]
        if progress:
            progress("selection", 1.0)
        return self.candidates

    def run_alignment(self, progress: ProgressFn | None = None
                      ) -> list[tuple[str, AlignmentResult]]:
        if self.candidates is None:
            raise StageError("alignment", "selection has not run")
        roi = self.config.roi if self.config.clipping else None
        if self.config.clipping and roi is None:
            raise StageError("alignment", "clipping is enabled but no ROI is set")
        results = []
        for i, cid in enumerate(self.candidates):
            mesh = self.repository.case(cid).load_mesh()
            results.append((cid, icp_align(mesh, self.target_mesh, roi=roi,
                                           settings=self.config.icp)))
            if progress:
                progress("alignment", (i + 1) / len(self.candidates))
        results.sort(key=lambda item: (item[1].fitness_mse, item[0]))
        k = min(self.config.selection.k, len(results))
        self.alignments = results[:k]
        return self.alignments

    def run_fusion(self, progress: ProgressFn | None = None) -> SparseGrid:
        if self.alignments is None:
            raise StageError("fusion", "alignment has not run")
        h = self.config.voxel_size
        target_sdf = self._target_sdf()
        occs = []
        for i, (cid, res) in enumerate(self.alignments):
            key = (cid, h, res.transform.rotation.tobytes(),
                   res.transform.translation.tobytes())
            if key not in self._occ_cache:
                moved = transform_mesh(self.repository.case(cid).load_mesh(),
                                       res.transform)
                sdf = mesh_to_sdf(moved, h, 2 * h, origin=target_sdf.origin)
                self._occ_cache[key] = sdf_to_occupancy(sdf)
            occs.append(self._occ_cache[key])
            if progress:
                progress("fusion", 0.9 * (i + 1) / len(self.alignments))
        self.ratio = accumulate_ratio(occs, origin=target_sdf.origin)
        self.recon = threshold_extract(self.ratio, self.config.threshold)
        if progress:
            progress("fusion", 1.0)
        return self.recon

    def run_postprocess(self, progress: ProgressFn | None = None) -> TriMesh:
        if self.recon is None:
            raise StageError("postprocess", "fusion has not run")
        offset_sdf = offset_surface(self._target_sdf(), self.config.offset)
        grids = [subtract(self.recon, offset_sdf)]
        for spec in self.config.operators:
            if spec.op == "segment":
                pieces = [comp for g in grids for comp in op_segment(g)]
                pieces.sort(key=_component_order)
                grids = pieces
            elif spec.op == "filter":
                grids = op_filter(grids, spec.first_n)
            elif spec.op == "smooth":
                grids = [op_smooth(g, spec.kind, spec.width, spec.iterations)
                         for g in grids]
        merged = _union_occupancy(grids)
        self.implant = (empty_mesh() if merged is None or merged.is_empty
                        else extract_mesh(merged))
        if progress:
            progress("postprocess", 1.0)
        return self.implant

    def run_metrics(self, progress: ProgressFn | None = None) -> MetricsReport:
        if self.implant is None:
            raise StageError("metrics", "postprocess has not run")
        truth = self.target.load_ground_truth()
        if truth is None:
            raise StageError("metrics", "target case has no ground truth")
        if self.implant.is_empty:
            raise StageError("metrics", "implant is empty; nothing to evaluate")
        self.report = evaluate_case(self.implant, truth, self.target.case_id)
        self.distances = signed_distances(self.implant, truth).astype("<f4")
        if progress:
            progress("metrics", 1.0)
        return self.report

    def ratio_histogram(self) -> list[tuple[float, int]]:
        if self.ratio is None:
            return []
        values = self.ratio.value_at(self.ratio.nonbackground_indices())
        uniq, counts = np.unique(values, return_counts=True)
        return [(float(v), int(c)) for v, c in zip(uniq, counts)]


def _component_order(g: SparseGrid):
    idx = g.nonbackground_indices()
    first = tuple(idx[np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))][0]) if len(idx) else ()
    return (-g.active_count(), first)


def _union_occupancy(grids: list[SparseGrid]) -> SparseGrid | None:
    grids = [g for g in grids if g.kind is GridKind.OCCUPANCY]
    if not grids:
        return None
    if len(grids) == 1:
        return grids[0]
    base = grids[0]
    parts = [g.active_indices() + g.lattice_offset_to(base) for g in grids]
    allidx = np.concatenate([p for p in parts if len(p)] or [np.zeros((0, 3), np.int64)])
    if not len(allidx):
        return SparseGrid(base.voxel_size, base.origin, GridKind.OCCUPANCY, {})
    uniq = np.unique(allidx, axis=0)
    return SparseGrid.from_indices(uniq, 1.0, base.voxel_size, base.origin,
                                   GridKind.OCCUPANCY)


def evaluate_case(implant: TriMesh, ground_truth: TriMesh,
                  label: str) -> MetricsReport:
    """Deviation of the implant against the reference implant."""
    return metrics_report(implant, ground_truth, case_label=label)


def run_reconstruction(config: PipelineConfig, target: CaseRecord,
                       repository: Repository, out_dir=None,
                       progress: ProgressFn | None = None):
    """Execute every stage in order; returns (implant, manifest, report).

    Metrics run only when the target has a ground truth. Stage failures
    surface as StageError naming the failed stage.
    """
    run = ReconstructionRun(config, target, repository)
    timings: dict[str, float] = {}

    def timed(stage: str, fn):
        t0 = time.perf_counter()
        try:
            result = fn(progress)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, str(exc)) from exc
        timings[stage] = (time.perf_counter() - t0) * 1000.0
        return result

    timed("selection", run.run_selection)
    timed("alignment", run.run_alignment)
    timed("fusion", run.run_fusion)
    implant = timed("postprocess", run.run_postprocess)
    rep = None
    if target.has_ground_truth:
        rep = timed("metrics", run.run_metrics)

    artifacts: dict[str, str] = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        implant_path = out_dir / "implant.stl"
        save_mesh(implant, implant_path)
        artifacts["implant"] = str(implant_path)
        if rep is not None:
            report_path = out_dir / "report.csv"
            report_path.write_text(MetricsReport.csv_header() + "\n"
                                   + rep.csv_row() + "\n")
            artifacts["report"] = str(report_path)

    manifest = RunManifest(
        config=config.to_dict(),
        target_case=target.case_id,
        candidates=list(run.candidates or []),
        alignments=[_alignment_record(cid, res) for cid, res in (run.alignments or [])],
        timings_ms=timings,
        artifacts=artifacts,
        version=__version__,
    )
    if out_dir is not None:
        (Path(out_dir) / "manifest.json").write_text(manifest.to_json())
    return implant, manifest, rep


def _alignment_record(cid: str, res: AlignmentResult) -> dict:
    return {
        "case_id": cid,
        "fitness_mse": res.fitness_mse,
        "iterations": res.iterations,
        "converged": res.converged,
        "rotation": [list(row) for row in res.transform.rotation.tolist()],
        "translation": list(res.transform.translation.tolist()),
    }


def implant_stl_bytes(implant: TriMesh) -> bytes:
    return mesh_to_stl_bytes(implant)
