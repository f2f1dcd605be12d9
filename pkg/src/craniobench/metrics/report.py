"""Deviation summaries: Min / Max / MAE over signed distances plus HD95.

Convention (recorded here because several choices exist in the wild): the
signed statistics sample the subject's vertices against the reference
surface; HD95 is the interpolated 95th percentile of the pooled symmetric
unsigned vertex-to-surface distances from both directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyRegionError
from ..geometry.mesh import TriMesh
from ..geometry.transforms import RoiSphere
from .distance import (signed_distances, signed_distances_to_points,
                       unsigned_distances_to_mesh)


@dataclass(frozen=True)
class MetricsReport:
    case_label: str
    min: float
    max: float
    mae: float
    hd95: float
    sample_count: int

    def __post_init__(self):
        if self.min > self.max:
            raise ValueError("min exceeds max")
        if self.mae < 0 or self.hd95 < 0:
            raise ValueError("mae and hd95 must be >= 0")

    def csv_row(self) -> str:
        return (f"{self.case_label},{self.min:.6g},{self.max:.6g},"
                f"{self.mae:.6g},{self.hd95:.6g},{self.sample_count}")

    @staticmethod
    def csv_header() -> str:
        return "case,min,max,mae,hd95,samples"


def report(subject: TriMesh, reference: TriMesh, case_label: str = "") -> MetricsReport:
    """Signed stats of subject vs reference, symmetric HD95 pooled both ways."""
    sd = signed_distances(subject, reference)
    reverse = unsigned_distances_to_mesh(reference.vertices, subject)
    pooled = np.concatenate([np.abs(sd), reverse])
    return MetricsReport(
        case_label=case_label,
        min=float(sd.min()),
        max=float(sd.max()),
        mae=float(np.abs(sd).mean()),
        hd95=float(np.percentile(pooled, 95)),
        sample_count=len(sd),
    )


def hd95_of(distances: np.ndarray) -> float:
    """Interpolated 95th percentile (linear between order statistics)."""
    return float(np.percentile(np.asarray(distances, dtype=np.float64), 95))


def border_band_mae(subject: TriMesh, reference: TriMesh, roi: RoiSphere,
                    band: float) -> float:
    """MAE restricted to subject vertices near the ROI sphere surface
    (|distance to center - radius| <= band)."""
    if not (band > 0):
        raise ValueError("band must be > 0")
    d_center = np.linalg.norm(subject.vertices - roi.center, axis=1)
    mask = np.abs(d_center - roi.radius) <= band
    if not mask.any():
        raise EmptyRegionError(
            f"empty band: no subject vertices within {band} mm of the ROI surface")
    sd = signed_distances_to_points(subject.vertices[mask], reference)
    return float(np.abs(sd).mean())
