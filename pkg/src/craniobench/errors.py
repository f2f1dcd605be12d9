"""Exception types shared across the workbench."""


class CranioError(Exception):
    """Base class for all workbench errors."""


class MeshFormatError(CranioError):
    """Unreadable or malformed mesh file."""


class VolumeFormatError(CranioError):
    """Unreadable or unsupported label volume file."""


class OpenMeshError(CranioError):
    """Operation requires a closed (watertight) mesh."""


class DegenerateGeometryError(CranioError):
    """Input geometry is rank-deficient for the requested operation."""


class LatticeMismatchError(CranioError):
    """Grids do not share a voxel size / origin lattice."""


class EmptyRegionError(CranioError):
    """A selection (ROI clip, distance band) contains no geometry."""


class StageError(CranioError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage
