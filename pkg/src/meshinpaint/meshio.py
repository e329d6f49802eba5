"""Readers and writers for OFF, OBJ and PLY triangle meshes.

Only positions and triangular faces are kept; any further attributes
(colors, normals, texture coordinates) are dropped with a warning.  ASCII
OFF is the canonical format used throughout the test-suite.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .errors import MeshParseError
from .mesh import Mesh

_FORMATS = ("off", "obj", "ply")


def _format_for(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in _FORMATS:
            raise MeshParseError(f"unsupported mesh format {fmt!r}")
        return fmt
    ext = Path(path).suffix.lower().lstrip(".")
    if ext not in _FORMATS:
        raise MeshParseError(f"cannot infer mesh format from {path!r}")
    return ext


def load_mesh(path, fmt=None):
    """Load and validate a triangle mesh; format inferred from the extension."""
    fmt = _format_for(path, fmt)
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise MeshParseError(f"cannot read {path}: {exc}") from exc
    if fmt == "off":
        verts, faces = _parse_off(raw, path)
    elif fmt == "obj":
        verts, faces = _parse_obj(raw, path)
    else:
        verts, faces = _parse_ply(raw, path)
    return Mesh(verts, faces)


def save_mesh(mesh, path, fmt=None):
    """Write a mesh; text coordinates keep full float64 precision."""
    fmt = _format_for(path, fmt)
    if fmt == "off":
        text = _emit_off(mesh)
    elif fmt == "obj":
        text = _emit_obj(mesh)
    else:
        text = _emit_ply(mesh)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise MeshParseError(f"cannot write {path}: {exc}") from exc


# -- OFF ------------------------------------------------------------------


def _tokens(raw):
    for line in raw.decode("utf-8", errors="replace").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield from line.split()


def _parse_off(raw, path):
    toks = _tokens(raw)
    try:
        magic = next(toks)
    except StopIteration:
        raise MeshParseError(f"{path}: empty OFF file") from None
    if magic not in ("OFF", "COFF", "NOFF"):
        raise MeshParseError(f"{path}: missing OFF header")
    per_vertex_extra = {"OFF": 0, "COFF": 4, "NOFF": 3}[magic]
    if per_vertex_extra:
        warnings.warn(f"{path}: dropping per-vertex attributes of {magic}")
    try:
        nv = int(next(toks))
        nf = int(next(toks))
        next(toks)  # edge count, unused
        width = 3 + per_vertex_extra
        verts = np.empty((nv, width))
        for i in range(nv):
            for j in range(width):
                verts[i, j] = float(next(toks))
        verts = verts[:, :3]
        faces = np.empty((nf, 3), dtype=np.int64)
        for i in range(nf):
            cnt = int(next(toks))
            if cnt != 3:
                raise MeshParseError(f"{path}: non-triangular face with {cnt} vertices")
            faces[i] = [int(next(toks)) for _ in range(3)]
    except MeshParseError:
        raise
    except (StopIteration, ValueError) as exc:
        raise MeshParseError(f"{path}: truncated or malformed OFF data") from exc
    return verts, faces


def _fmt_floats(row):
    return " ".join(repr(float(x)) for x in row)


def _emit_off(mesh):
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    lines += [_fmt_floats(v) for v in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    return "\n".join(lines) + "\n"


# -- OBJ ------------------------------------------------------------------


def _parse_obj(raw, path):
    verts, faces = [], []
    dropped = set()
    for ln, line in enumerate(raw.decode("utf-8", errors="replace").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshParseError(f"{path}:{ln}: vertex needs 3 coordinates")
            verts.append([float(x) for x in parts[1:4]])
        elif tag == "f":
            idx = [p.split("/")[0] for p in parts[1:]]
            if len(idx) != 3:
                raise MeshParseError(f"{path}:{ln}: non-triangular face with {len(idx)} vertices")
            try:
                face = [int(i) for i in idx]
            except ValueError as exc:
                raise MeshParseError(f"{path}:{ln}: bad face index") from exc
            faces.append([i - 1 if i > 0 else len(verts) + i for i in face])
        else:
            dropped.add(tag)
    if dropped:
        warnings.warn(f"{path}: dropping OBJ attributes {sorted(dropped)}")
    if not verts:
        raise MeshParseError(f"{path}: no vertices found")
    return np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def _emit_obj(mesh):
    lines = [f"v {_fmt_floats(v)}" for v in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    return "\n".join(lines) + "\n"


# -- PLY ------------------------------------------------------------------

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply(raw, path):
    try:
        end = raw.index(b"end_header")
    except ValueError:
        raise MeshParseError(f"{path}: PLY header has no end_header") from None
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[raw.index(b"\n", end) + 1:]
    if not header or header[0].strip() != "ply":
        raise MeshParseError(f"{path}: missing ply magic")

    fmt = None
    elements = []  # (name, count, [(prop_name, dtype) or ("list", count_dt, item_dt, name)])
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshParseError(f"{path}: property before element")
            if parts[1] == "list":
                elements[-1][2].append(("list", _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]], parts[4]))
            else:
                elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]]))
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise MeshParseError(f"{path}: unsupported PLY format {fmt!r}")
    endian = "<" if fmt != "binary_big_endian" else ">"

    verts = faces = None
    dropped = []
    if fmt == "ascii":
        toks = iter(body.decode("ascii", errors="replace").split())
        for name, count, props in elements:
            rows = []
            try:
                for _ in range(count):
                    row = []
                    for p in props:
                        if p[0] == "list":
                            n = int(next(toks))
                            row.append([float(next(toks)) for _ in range(n)])
                        else:
                            row.append(float(next(toks)))
                    rows.append(row)
            except StopIteration:
                raise MeshParseError(f"{path}: truncated PLY data in element {name}") from None
            verts, faces, dropped = _ply_collect(name, props, rows, verts, faces, dropped, path)
    else:
        offset = 0
        for name, count, props in elements:
            rows = []
            for _ in range(count):
                row = []
                for p in props:
                    if p[0] == "list":
                        cnt_dt, item_dt = np.dtype(endian + p[1]), np.dtype(endian + p[2])
                        if offset + cnt_dt.itemsize > len(body):
                            raise MeshParseError(f"{path}: truncated PLY data")
                        n = int(np.frombuffer(body, cnt_dt, 1, offset)[0])
                        offset += cnt_dt.itemsize
                        if offset + n * item_dt.itemsize > len(body):
                            raise MeshParseError(f"{path}: truncated PLY data")
                        row.append(np.frombuffer(body, item_dt, n, offset).tolist())
                        offset += n * item_dt.itemsize
                    else:
                        dt = np.dtype(endian + p[1])
                        if offset + dt.itemsize > len(body):
                            raise MeshParseError(f"{path}: truncated PLY data")
                        row.append(float(np.frombuffer(body, dt, 1, offset)[0]))
                        offset += dt.itemsize
                rows.append(row)
            verts, faces, dropped = _ply_collect(name, props, rows, verts, faces, dropped, path)
    if dropped:
        warnings.warn(f"{path}: dropping PLY attributes {sorted(set(dropped))}")
    if verts is None:
        raise MeshParseError(f"{path}: PLY file has no vertex element")
    if faces is None:
        faces = np.empty((0, 3), dtype=np.int64)
    return verts, faces


def _ply_collect(name, props, rows, verts, faces, dropped, path):
    if name == "vertex":
        names = [p[0] if p[0] != "list" else p[3] for p in props]
        for extra in names:
            if extra not in ("x", "y", "z"):
                dropped.append(extra)
        try:
            cols = [names.index(ax) for ax in ("x", "y", "z")]
        except ValueError:
            raise MeshParseError(f"{path}: vertex element lacks x/y/z") from None
        verts = np.asarray([[r[c] for c in cols] for r in rows], dtype=np.float64)
    elif name == "face":
        lists = [i for i, p in enumerate(props) if p[0] == "list"]
        if not lists:
            raise MeshParseError(f"{path}: face element lacks an index list")
        out = []
        for r in rows:
            idx = r[lists[0]]
            if len(idx) != 3:
                raise MeshParseError(f"{path}: non-triangular face with {len(idx)} vertices")
            out.append([int(i) for i in idx])
        faces = np.asarray(out, dtype=np.int64).reshape(-1, 3)
    else:
        dropped.append(name)
    return verts, faces, dropped


def _emit_ply(mesh):
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    lines += [_fmt_floats(v) for v in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    return "\n".join(lines) + "\n"
