"""Template retrieval: rank library skulls against the target."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..geometry.mesh import TriMesh
from ..geometry.transforms import RoiSphere
from .gasd import GasdDescriptor, gasd_descriptor
from .icp import AlignmentResult, IcpSettings, icp_align


class SelectionMode(enum.Enum):
    ALL_BEST_K = "all_best_k"
    GASD_TOP_K = "gasd_top_k"


@dataclass
class TemplateEntry:
    case_id: str
    mesh: TriMesh
    descriptor: GasdDescriptor | None = None


def select_templates(target: TriMesh, library: list[TemplateEntry],
                     mode: SelectionMode = SelectionMode.ALL_BEST_K,
                     k: int = 20, roi: RoiSphere | None = None,
                     settings: IcpSettings | None = None,
                     ) -> list[tuple[str, AlignmentResult]]:
    """Pick the k best-aligned templates for the target.

    ALL_BEST_K aligns every library case and keeps the k smallest fitness;
    GASD_TOP_K pre-filters to the k nearest descriptors, then aligns only
    those. Results are sorted by ascending fitness, ties broken by case id.
    """
    if not library:
        raise ValueError("template library is empty")
    if k < 1 or k > len(library):
        raise ValueError(f"k must be in [1, {len(library)}], got {k}")

    if mode is SelectionMode.GASD_TOP_K:
        target_desc = gasd_descriptor(target)
        ranked = sorted(
            ((target_desc.distance(e.descriptor or gasd_descriptor(e.mesh)), e.case_id, e)
             for e in library),
            key=lambda item: (item[0], item[1]))
        candidates = [e for _, _, e in ranked[:k]]
    elif mode is SelectionMode.ALL_BEST_K:
        candidates = list(library)
    else:
        raise ValueError(f"unknown selection mode {mode}")

    aligned = [(e.case_id, icp_align(e.mesh, target, roi=roi, settings=settings))
               for e in candidates]
    aligned.sort(key=lambda item: (item[1].fitness_mse, item[0]))
    return aligned[:k]
