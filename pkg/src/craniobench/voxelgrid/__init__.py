from .grid import GridKind, SparseGrid, CHUNK
from .sdf import mesh_to_sdf, sdf_to_occupancy, labels_to_occupancy, sdf_from_dense
from .fuse import OffsetField, accumulate_ratio, threshold_extract, offset_surface, subtract
from .operators import op_segment, op_filter, op_smooth, SmoothKind
from .extract import extract_mesh
from .gridio import save_grid, load_grid

__all__ = [
    "GridKind",
    "SparseGrid",
    "CHUNK",
    "mesh_to_sdf",
    "sdf_to_occupancy",
    "labels_to_occupancy",
    "sdf_from_dense",
    "OffsetField",
    "accumulate_ratio",
    "threshold_extract",
    "offset_surface",
    "subtract",
    "op_segment",
    "op_filter",
    "op_smooth",
    "SmoothKind",
    "extract_mesh",
    "save_grid",
    "load_grid",
]
