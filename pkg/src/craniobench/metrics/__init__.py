from .distance import signed_distances, unsigned_distances_to_mesh, points_inside_mesh
from .report import MetricsReport, report, border_band_mae

__all__ = [
    "signed_distances",
    "unsigned_distances_to_mesh",
    "points_inside_mesh",
    "MetricsReport",
    "report",
    "border_band_mae",
]
