"""Pipeline configuration: JSON file(s) with explicit keys, defaults for
absent keys, and validation that names the offending field."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CranioError
from ..geometry.transforms import RoiSphere
from ..registration.icp import IcpSettings
from ..registration.rigid import Objective
from ..registration.select import SelectionMode
from ..voxelgrid.fuse import OffsetField
from ..voxelgrid.operators import SmoothKind


class ConfigError(CranioError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SelectionConfig:
    mode: SelectionMode = SelectionMode.ALL_BEST_K
    k: int = 20

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("selection.k", "must be >= 1")


@dataclass(frozen=True)
class OperatorSpec:
    """One post-processing step: segment, filter, or smooth."""

    op: str
    first_n: int = 1
    kind: SmoothKind = SmoothKind.GAUSSIAN
    width: int = 3
    iterations: int = 1

    def __post_init__(self):
        if self.op not in ("segment", "filter", "smooth"):
            raise ConfigError("operators.op", f"unknown operator '{self.op}'")
        if self.op == "filter" and self.first_n < 0:
            raise ConfigError("operators.first_n", "must be >= 0")
        if self.op == "smooth":
            if self.width < 1:
                raise ConfigError("operators.width", "must be >= 1 voxel")
            if self.iterations < 0:
                raise ConfigError("operators.iterations", "must be >= 0")

    def to_dict(self) -> dict:
        if self.op == "segment":
            return {"op": "segment"}
        if self.op == "filter":
            return {"op": "filter", "first_n": self.first_n}
        return {"op": "smooth", "kind": self.kind.value, "width": self.width,
                "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d: dict) -> "OperatorSpec":
        if not isinstance(d, dict) or "op" not in d:
            raise ConfigError("operators", "each operator needs an 'op' key")
        op = d["op"]
        try:
            if op == "filter":
                return cls("filter", first_n=int(d.get("first_n", 1)))
            if op == "smooth":
                return cls("smooth", kind=SmoothKind(d.get("kind", "gaussian")),
                           width=int(d.get("width", 3)),
                           iterations=int(d.get("iterations", 1)))
        except (ValueError, TypeError) as exc:
            raise ConfigError("operators", str(exc)) from exc
        return cls(op)


def _default_operators() -> tuple[OperatorSpec, ...]:
    return (OperatorSpec("segment"), OperatorSpec("filter", first_n=1))


@dataclass(frozen=True)
class PipelineConfig:
    voxel_size: float = 0.5
    threshold: float = 0.5
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    icp: IcpSettings = field(default_factory=IcpSettings)
    clipping: bool = True
    roi: RoiSphere | None = None
    offset: OffsetField = field(default_factory=lambda: OffsetField(1.0, (), 5.0))
    operators: tuple[OperatorSpec, ...] = field(default_factory=_default_operators)
    seed: int = 0

    def __post_init__(self):
        if not (self.voxel_size > 0):
            raise ConfigError("voxel_size", "must be > 0")
        if not (0.0 <= self.threshold < 1.0):
            raise ConfigError("threshold", "must lie in [0, 1)")
        object.__setattr__(self, "operators", tuple(self.operators))

    def to_dict(self) -> dict:
        return {
            "voxel_size": self.voxel_size,
            "threshold": self.threshold,
            "selection": {"mode": self.selection.mode.value, "k": self.selection.k},
            "icp": {
                "objective": self.icp.objective.value,
                "max_iterations": self.icp.max_iterations,
                "mse_threshold": self.icp.mse_threshold,
                "mse_delta_threshold": self.icp.mse_delta_threshold,
                "max_correspondence_distance": self.icp.max_correspondence_distance,
                "normal_compat_min_cos": self.icp.normal_compat_min_cos,
            },
            "clipping": self.clipping,
            "roi": _roi_to_dict(self.roi),
            "offset": {
                "base_offset": self.offset.base_offset,
                "falloff": self.offset.falloff,
                "border_markers": [_roi_to_dict(m) for m in self.offset.border_markers],
            },
            "operators": [op.to_dict() for op in self.operators],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise ConfigError("config", "expected a JSON object")
        known = {"voxel_size", "threshold", "selection", "icp", "clipping",
                 "roi", "offset", "operators", "seed"}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown config field")
        defaults = cls()
        try:
            selection = _parse_selection(data.get("selection"), defaults.selection)
            icp = _parse_icp(data.get("icp"), defaults.icp)
            roi = _parse_roi(data.get("roi"), "roi")
            offset = _parse_offset(data.get("offset"), defaults.offset)
            ops = data.get("operators")
            operators = (defaults.operators if ops is None
                         else tuple(OperatorSpec.from_dict(o) for o in ops))
            return cls(
                voxel_size=float(data.get("voxel_size", defaults.voxel_size)),
                threshold=float(data.get("threshold", defaults.threshold)),
                selection=selection,
                icp=icp,
                clipping=bool(data.get("clipping", defaults.clipping)),
                roi=roi,
                offset=offset,
                operators=operators,
                seed=int(data.get("seed", defaults.seed)),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError("config", str(exc)) from exc


def _roi_to_dict(roi: RoiSphere | None) -> dict | None:
    if roi is None:
        return None
    return {"center": [float(x) for x in roi.center], "radius": roi.radius}


def _parse_roi(d, field_name: str) -> RoiSphere | None:
    if d is None:
        return None
    if not isinstance(d, dict) or "center" not in d or "radius" not in d:
        raise ConfigError(field_name, "needs 'center' and 'radius'")
    center = np.asarray(d["center"], dtype=np.float64)
    if center.shape != (3,) or not np.isfinite(center).all():
        raise ConfigError(f"{field_name}.center", "must be 3 finite numbers")
    try:
        return RoiSphere(center, float(d["radius"]))
    except ValueError as exc:
        raise ConfigError(f"{field_name}.radius", str(exc)) from exc


def _parse_selection(d, default: SelectionConfig) -> SelectionConfig:
    if d is None:
        return default
    try:
        return SelectionConfig(
            mode=SelectionMode(d.get("mode", default.mode.value)),
            k=int(d.get("k", default.k)))
    except ValueError as exc:
        raise ConfigError("selection.mode", str(exc)) from exc


def _parse_icp(d, default: IcpSettings) -> IcpSettings:
    if d is None:
        return default
    try:
        return IcpSettings(
            objective=Objective(d.get("objective", default.objective.value)),
            max_iterations=int(d.get("max_iterations", default.max_iterations)),
            mse_threshold=float(d.get("mse_threshold", default.mse_threshold)),
            mse_delta_threshold=float(d.get("mse_delta_threshold",
                                            default.mse_delta_threshold)),
            max_correspondence_distance=float(
                d.get("max_correspondence_distance",
                      default.max_correspondence_distance)),
            normal_compat_min_cos=float(d.get("normal_compat_min_cos",
                                              default.normal_compat_min_cos)),
        )
    except ValueError as exc:
        raise ConfigError("icp", str(exc)) from exc


def _parse_offset(d, default: OffsetField) -> OffsetField:
    if d is None:
        return default
    markers = []
    for i, m in enumerate(d.get("border_markers", [])):
        roi = _parse_roi(m, f"offset.border_markers[{i}]")
        if roi is not None:
            markers.append(roi)
    try:
        return OffsetField(
            base_offset=float(d.get("base_offset", default.base_offset)),
            border_markers=tuple(markers),
            falloff=float(d.get("falloff", default.falloff)))
    except ValueError as exc:
        raise ConfigError("offset", str(exc)) from exc


def load_config(path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}") from exc
    return PipelineConfig.from_dict(data)


def save_config(config: PipelineConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
