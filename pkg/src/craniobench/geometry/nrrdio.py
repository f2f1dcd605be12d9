"""Narrow NRRD reader for label volumes (3D, axis-aligned, raw/gzip).

Covers the subset used by skull segmentation datasets; anything else
errors loudly rather than silently misreading.
"""

from __future__ import annotations

import gzip
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import VolumeFormatError

_TYPE_MAP = {
    "unsigned char": "u1", "uchar": "u1", "uint8": "u1", "uint8_t": "u1",
    "short": "i2", "short int": "i2", "signed short": "i2", "int16": "i2", "int16_t": "i2",
    "unsigned short": "u2", "unsigned short int": "u2", "ushort": "u2",
    "uint16": "u2", "uint16_t": "u2",
}


@dataclass(frozen=True)
class LabelVolume:
    """Dense scalar volume; label > 0 means bone.

    sizes is (nx, ny, nz) with x the fastest-varying axis of `labels`;
    origin is the world position (mm) of the first voxel center.
    """

    sizes: np.ndarray
    spacing: np.ndarray
    origin: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64).reshape(3)
        spacing = np.asarray(self.spacing, dtype=np.float64).reshape(3)
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        labels = np.asarray(self.labels).reshape(-1)
        if (sizes <= 0).any():
            raise ValueError("sizes must be positive")
        if (spacing <= 0).any():
            raise ValueError("spacing must be positive")
        if labels.size != int(np.prod(sizes)):
            raise ValueError("labels length must equal product of sizes")
        for name, arr in (("sizes", sizes), ("spacing", spacing),
                          ("origin", origin), ("labels", labels)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def as_array(self) -> np.ndarray:
        """Labels as an (nx, ny, nz)-indexed array."""
        nx, ny, nz = self.sizes
        return self.labels.reshape(nz, ny, nx).transpose(2, 1, 0)

    def bone_voxel_count(self) -> int:
        return int((self.labels > 0).sum())


def load_nrrd(path) -> LabelVolume:
    """Read a 3D NRRD file (raw or gzip encoding, axis-aligned space)."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise VolumeFormatError(f"cannot read {path}: {exc}") from exc
    if not re.match(rb"NRRD000[1-5]", data[:8]):
        raise VolumeFormatError(f"{path}: missing NRRD magic")

    header, payload = _split_header(data, path)
    fields = _parse_fields(header, path)

    dim = int(fields.get("dimension", "0"))
    if dim != 3:
        raise VolumeFormatError(f"{path}: unsupported dimension {dim} (only 3 supported)")

    sizes = np.array([int(s) for s in fields["sizes"].split()], dtype=np.int64)
    if sizes.size != 3:
        raise VolumeFormatError(f"{path}: sizes must have 3 entries")

    type_name = fields.get("type", "").strip().lower()
    if type_name not in _TYPE_MAP:
        raise VolumeFormatError(f"{path}: unsupported type '{fields.get('type')}'")
    base = _TYPE_MAP[type_name]

    encoding = fields.get("encoding", "raw").strip().lower()
    if encoding in ("gzip", "gz"):
        try:
            payload = gzip.decompress(payload)
        except OSError as exc:
            raise VolumeFormatError(f"{path}: gzip decompression failed: {exc}") from exc
    elif encoding != "raw":
        raise VolumeFormatError(f"{path}: unsupported encoding '{encoding}'")

    endian = fields.get("endian", "little").strip().lower()
    if endian not in ("little", "big"):
        raise VolumeFormatError(f"{path}: unsupported endian '{endian}'")
    dtype = np.dtype(("<" if endian == "little" else ">") + base)

    count = int(np.prod(sizes))
    if len(payload) < count * dtype.itemsize:
        raise VolumeFormatError(f"{path}: payload too short for declared sizes")
    labels = np.frombuffer(payload, dtype=dtype, count=count)

    spacing, origin = _space_geometry(fields, path)
    return LabelVolume(sizes=sizes, spacing=spacing, origin=origin,
                       labels=labels.astype(labels.dtype.newbyteorder("=")))


def _split_header(data: bytes, path: Path) -> tuple[str, bytes]:
    for sep in (b"\n\n", b"\r\n\r\n"):
        idx = data.find(sep)
        if idx >= 0:
            return data[:idx].decode("ascii", errors="replace"), data[idx + len(sep):]
    raise VolumeFormatError(f"{path}: header/data separator (blank line) not found")


def _parse_fields(header: str, path: Path) -> dict[str, str]:
    fields: dict[str, str] = {}
    for line in header.splitlines()[1:]:
        line = line.strip()
        if not line or line.startswith("#") or ":=" in line:
            continue  # comments and key/value metadata are ignored
        if ":" not in line:
            raise VolumeFormatError(f"{path}: malformed header line '{line}'")
        key, value = line.split(":", 1)
        fields[key.strip().lower()] = value.strip()
    if "sizes" not in fields:
        raise VolumeFormatError(f"{path}: header lacks 'sizes'")
    if "data file" in fields or "datafile" in fields:
        raise VolumeFormatError(f"{path}: detached data files are unsupported")
    return fields


_VEC_RE = re.compile(r"\(([^)]*)\)")


def _space_geometry(fields: dict[str, str], path: Path) -> tuple[np.ndarray, np.ndarray]:
    spacing = np.ones(3)
    if "space directions" in fields:
        vecs = _VEC_RE.findall(fields["space directions"])
        if len(vecs) != 3:
            raise VolumeFormatError(f"{path}: expected 3 space direction vectors")
        m = np.array([[float(x) for x in v.split(",")] for v in vecs])
        off_diag = m - np.diag(np.diag(m))
        if np.abs(off_diag).max() > 1e-9:
            raise VolumeFormatError(f"{path}: non-axis-aligned space directions are unsupported")
        spacing = np.abs(np.diag(m))
        if (np.diag(m) < 0).any():
            raise VolumeFormatError(f"{path}: negative space directions are unsupported")
    elif "spacings" in fields:
        spacing = np.array([float(x) for x in fields["spacings"].split()])
        if spacing.size != 3:
            raise VolumeFormatError(f"{path}: expected 3 spacings")

    origin = np.zeros(3)
    if "space origin" in fields:
        vec = _VEC_RE.search(fields["space origin"])
        if not vec:
            raise VolumeFormatError(f"{path}: malformed space origin")
        origin = np.array([float(x) for x in vec.group(1).split(",")])
        if origin.size != 3:
            raise VolumeFormatError(f"{path}: space origin must have 3 components")
    return spacing, origin
