"""Plain-text OBJ and ASCII PLY export of triangle meshes.

Numbers are written with a fixed ``%.9g`` format so that identical meshes
give byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

FLOAT_FMT = "%.9g"


def _check(verts, faces):
    verts = np.asarray(verts, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if verts.ndim != 2 or verts.shape[1] != 3:
        raise ValueError("verts must have shape (V, 3)")
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise ValueError("faces must have shape (F, 3)")
    if len(faces) and (faces.min() < 0 or faces.max() >= len(verts)):
        raise ValueError("face index out of range")
    if not np.all(np.isfinite(verts)):
        raise ValueError("non-finite vertex coordinates")
    return verts, faces


def write_obj(path, verts, faces, comment: str | None = None) -> None:
    """Write ``v x y z`` / ``f i j k`` lines (1-based indices)."""
    verts, faces = _check(verts, faces)
    lines = []
    if comment:
        lines += ["# " + c for c in comment.splitlines()]
    fmt = " ".join([FLOAT_FMT] * 3)
    lines += ["v " + fmt % tuple(v) for v in verts.tolist()]
    lines += ["f %d %d %d" % tuple(f) for f in (faces + 1).tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_obj(path):
    """Read vertices and triangles back from an OBJ written by :func:`write_obj`."""
    verts, faces = [], []
    for line in Path(path).read_text(encoding="ascii").splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def write_ply(path, verts, faces) -> None:
    """ASCII PLY with float vertices and uchar/int face lists."""
    verts, faces = _check(verts, faces)
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(verts)}",
        "property float x",
        "property float y",
        "property float z",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    fmt = " ".join([FLOAT_FMT] * 3)
    body = [fmt % tuple(v) for v in verts.tolist()]
    body += ["3 %d %d %d" % tuple(f) for f in faces.tolist()]
    Path(path).write_text("\n".join(header + body) + "\n", encoding="ascii")


def write_mesh(path, verts, faces) -> None:
    """Dispatch on the file suffix (``.obj`` or ``.ply``)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        write_obj(path, verts, faces)
    elif suffix == ".ply":
        write_ply(path, verts, faces)
    else:
        raise ValueError(f"unsupported mesh format {suffix!r}")
