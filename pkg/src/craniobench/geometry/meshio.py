"""Mesh file I/O: binary/ASCII STL and PLY input, binary STL output."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import MeshFormatError
from .mesh import TriMesh, weld_vertices

_STL_HEADER_BYTES = 80
_STL_RECORD_BYTES = 50


def load_mesh(path) -> TriMesh:
    """Load an STL (binary or ASCII) or PLY (ascii / binary LE) mesh.

    STL triangle soup is welded: coincident vertices merge within 1e-5 mm.
    """
    path = Path(path)
    if not path.exists():
        raise MeshFormatError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    data = path.read_bytes()
    if suffix == ".ply" or data.startswith(b"ply"):
        return _load_ply(data, path)
    if suffix in (".stl", ".stla", ""):
        return _load_stl(data, path)
    raise MeshFormatError(f"unsupported mesh format: {path.suffix}")


def mesh_to_stl_bytes(mesh: TriMesh) -> bytes:
    """Binary STL serialization: 80-byte header, uint32 count, 50-byte records."""
    tris = mesh.triangle_corners().astype(np.float32)
    n = len(tris)
    record = np.zeros(n, dtype=_stl_record_dtype())
    if n:
        p = tris
        fn = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]).astype(np.float64)
        lengths = np.linalg.norm(fn, axis=1)
        fn = np.where(lengths[:, None] > 1e-300, fn / np.where(lengths == 0, 1, lengths)[:, None], 0.0)
        record["normal"] = fn.astype("<f4")
        record["v0"] = p[:, 0]
        record["v1"] = p[:, 1]
        record["v2"] = p[:, 2]
    header = b"craniobench binary STL".ljust(_STL_HEADER_BYTES, b" ")
    return header + struct.pack("<I", n) + record.tobytes()


def save_mesh(mesh: TriMesh, path) -> None:
    """Write binary STL; load_mesh reproduces the geometry to 1e-5 mm."""
    path = Path(path)
    try:
        path.write_bytes(mesh_to_stl_bytes(mesh))
    except OSError as exc:
        raise MeshFormatError(f"cannot write {path}: {exc}") from exc


def _stl_record_dtype():
    return np.dtype([("normal", "<f4", 3), ("v0", "<f4", 3),
                     ("v1", "<f4", 3), ("v2", "<f4", 3), ("attr", "<u2")])


def _load_stl(data: bytes, path: Path) -> TriMesh:
    if _looks_ascii_stl(data):
        return _load_stl_ascii(data, path)
    if len(data) < _STL_HEADER_BYTES + 4:
        raise MeshFormatError(f"malformed file: {path} is too short for binary STL")
    (count,) = struct.unpack_from("<I", data, _STL_HEADER_BYTES)
    expected = _STL_HEADER_BYTES + 4 + count * _STL_RECORD_BYTES
    if len(data) != expected:
        raise MeshFormatError(
            f"malformed file: {path} declares {count} triangles "
            f"({expected} bytes) but has {len(data)} bytes")
    records = np.frombuffer(data, dtype=_stl_record_dtype(),
                            count=count, offset=_STL_HEADER_BYTES + 4)
    soup = np.stack([records["v0"], records["v1"], records["v2"]],
                    axis=1).astype(np.float64).reshape(-1, 3)
    tris = np.arange(3 * count, dtype=np.int64).reshape(-1, 3)
    return weld_vertices(soup, tris)


def _looks_ascii_stl(data: bytes) -> bool:
    head = data[:512].lstrip()
    if not head.lower().startswith(b"solid"):
        return False
    # binary files may also start with "solid"; require ASCII keywords
    return b"facet" in data[:1024].lower() or data.strip().lower().endswith(b"endsolid")


def _load_stl_ascii(data: bytes, path: Path) -> TriMesh:
    try:
        text = data.decode("ascii", errors="strict")
    except UnicodeDecodeError as exc:
        raise MeshFormatError(f"malformed file: {path} is not valid ASCII STL") from exc
    soup = []
    for line in text.splitlines():
        parts = line.split()
        if parts[:1] == ["vertex"]:
            if len(parts) != 4:
                raise MeshFormatError(f"malformed file: bad vertex line in {path}")
            soup.append([float(x) for x in parts[1:]])
    if len(soup) % 3 != 0:
        raise MeshFormatError(f"malformed file: {path} vertex count not a multiple of 3")
    soup = np.asarray(soup, dtype=np.float64).reshape(-1, 3)
    tris = np.arange(len(soup), dtype=np.int64).reshape(-1, 3)
    return weld_vertices(soup, tris)


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _load_ply(data: bytes, path: Path) -> TriMesh:
    idx = data.find(b"end_header")
    if not data.startswith(b"ply") or idx < 0:
        raise MeshFormatError(f"malformed file: {path} missing PLY header")
    endl = data.find(b"\n", idx)
    header_text = data[:endl].decode("ascii", errors="replace")
    body = data[endl + 1:]

    fmt = None
    elements: list[tuple[str, int, list]] = []  # (name, count, properties)
    for line in header_text.splitlines():
        parts = line.strip().split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property" and elements:
            if parts[1] == "list":
                elements[-1][2].append(("list", parts[2], parts[3], parts[4]))
            else:
                elements[-1][2].append(("scalar", parts[1], parts[2]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshFormatError(f"unsupported PLY format '{fmt}' in {path}")

    if fmt == "ascii":
        verts, faces = _ply_parse_ascii(body, elements, path)
    else:
        verts, faces = _ply_parse_binary(body, elements, path)

    if len(faces) and (faces.min() < 0 or faces.max() >= len(verts)):
        raise MeshFormatError(f"malformed file: {path} face index out of range")
    return TriMesh(verts, faces.astype(np.int32))


def _ply_parse_ascii(body: bytes, elements, path: Path):
    tokens = body.split()
    pos = 0
    verts = np.zeros((0, 3))
    faces: list[list[int]] = []
    for name, count, props in elements:
        if name == "vertex":
            width = len(props)
            cols = {p[1]: i for i, p in enumerate(props) if p[0] == "scalar"}
            if not {"x", "y", "z"} <= cols.keys():
                raise MeshFormatError(f"malformed file: {path} vertex element lacks x/y/z")
            try:
                block = np.array(tokens[pos:pos + count * width], dtype=np.float64)
            except ValueError as exc:
                raise MeshFormatError(f"malformed file: {path} bad vertex data") from exc
            if block.size != count * width:
                raise MeshFormatError(f"malformed file: {path} truncated vertex data")
            block = block.reshape(count, width)
            verts = block[:, [cols["x"], cols["y"], cols["z"]]]
            pos += count * width
        else:
            has_list = any(p[0] == "list" for p in props)
            for _ in range(count):
                if not has_list:
                    pos += len(props)
                    continue
                row: list[int] = []
                for p in props:
                    if p[0] == "list":
                        n = int(tokens[pos]); pos += 1
                        vals = [int(t) for t in tokens[pos:pos + n]]; pos += n
                        if p[3] == "vertex_indices" or p[3] == "vertex_index":
                            row = vals
                    else:
                        pos += 1
                if name == "face" and row:
                    faces.extend(_fan(row))
    return verts, np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def _ply_parse_binary(body: bytes, elements, path: Path):
    offset = 0
    verts = np.zeros((0, 3))
    faces: list[list[int]] = []
    for name, count, props in elements:
        if name == "vertex":
            fields = []
            for i, p in enumerate(props):
                if p[0] != "scalar":
                    raise MeshFormatError(f"unsupported PLY: list property in vertex element of {path}")
                fields.append((p[1] if p[1] not in ("",) else f"f{i}", "<" + _PLY_TYPES[p[2]]))
            dt = np.dtype(fields)
            need = count * dt.itemsize
            if len(body) - offset < need:
                raise MeshFormatError(f"malformed file: {path} truncated vertex data")
            block = np.frombuffer(body, dtype=dt, count=count, offset=offset)
            offset += need
            verts = np.stack([block["x"], block["y"], block["z"]], axis=1).astype(np.float64)
        else:
            for _ in range(count):
                row: list[int] = []
                for p in props:
                    if p[0] == "list":
                        cdt = np.dtype("<" + _PLY_TYPES[p[1]])
                        idt = np.dtype("<" + _PLY_TYPES[p[2]])
                        if len(body) - offset < cdt.itemsize:
                            raise MeshFormatError(f"malformed file: {path} truncated face data")
                        n = int(np.frombuffer(body, dtype=cdt, count=1, offset=offset)[0])
                        offset += cdt.itemsize
                        if len(body) - offset < n * idt.itemsize:
                            raise MeshFormatError(f"malformed file: {path} truncated face data")
                        vals = np.frombuffer(body, dtype=idt, count=n, offset=offset).tolist()
                        offset += n * idt.itemsize
                        if p[3] in ("vertex_indices", "vertex_index"):
                            row = vals
                    else:
                        offset += np.dtype(_PLY_TYPES[p[2]]).itemsize
                if name == "face" and row:
                    faces.extend(_fan(row))
    return verts, np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def _fan(indices: list[int]) -> list[list[int]]:
    if len(indices) < 3:
        return []
    return [[indices[0], indices[i], indices[i + 1]] for i in range(1, len(indices) - 1)]
