"""Strict readers/writers for XYZ point files and OFF triangle meshes."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import FormatError
from .geometry import TriangleMesh


def _floats(tokens, path, lineno):
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise FormatError(f"non-numeric value in {' '.join(tokens)!r}", path, lineno) from None
    if not all(math.isfinite(v) for v in vals):
        raise FormatError("non-finite coordinate", path, lineno)
    return vals


def read_xyz(path) -> np.ndarray:
    """One ``x y z`` triple per line; blank lines and ``#`` comments are skipped."""
    path = Path(path)
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tokens = s.split()
            if len(tokens) != 3:
                raise FormatError(f"expected 3 values, found {len(tokens)}", path, lineno)
            rows.append(_floats(tokens, path, lineno))
    if not rows:
        raise FormatError("no points in file", path)
    return np.asarray(rows, dtype=np.float64)


def format_xyz(points) -> str:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    # repr() round-trips float64 exactly
    return "".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist())


def write_xyz(path, points) -> None:
    Path(path).write_text(format_xyz(points), encoding="utf-8")


def read_off(path) -> TriangleMesh:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [(i, ln.split("#", 1)[0].strip()) for i, ln in enumerate(fh, start=1)]
    lines = [(i, s) for i, s in lines if s]
    if not lines:
        raise FormatError("empty OFF file", path)
    lineno, head = lines[0]
    pos = 1
    if head == "OFF":
        if len(lines) < 2:
            raise FormatError("missing count line", path, lineno)
        lineno, counts = lines[1]
        pos = 2
    elif head.startswith("OFF"):
        # header and counts on one line, e.g. "OFF 8 12 0"
        counts = head[3:].strip()
    else:
        raise FormatError("missing OFF header", path, lineno)
    parts = counts.split()
    if len(parts) != 3:
        raise FormatError("count line must hold 'nv nf ne'", path, lineno)
    try:
        nv, nf, _ = (int(p) for p in parts)
    except ValueError:
        raise FormatError("non-integer counts", path, lineno) from None
    if nv < 0 or nf < 0:
        raise FormatError("negative counts", path, lineno)
    if len(lines) - pos < nv + nf:
        raise FormatError(f"expected {nv} vertices and {nf} faces, file too short", path, lines[-1][0])
    verts = []
    for lineno, s in lines[pos:pos + nv]:
        tokens = s.split()
        if len(tokens) != 3:
            raise FormatError(f"vertex line needs 3 values, found {len(tokens)}", path, lineno)
        verts.append(_floats(tokens, path, lineno))
    faces = []
    for lineno, s in lines[pos + nv:pos + nv + nf]:
        tokens = s.split()
        try:
            ints = [int(t) for t in tokens]
        except ValueError:
            raise FormatError("non-integer face entry", path, lineno) from None
        if len(ints) != 4 or ints[0] != 3:
            raise FormatError("only triangular faces '3 i j k' are supported", path, lineno)
        if min(ints[1:]) < 0 or max(ints[1:]) >= nv:
            raise FormatError("face index out of range", path, lineno)
        faces.append(ints[1:])
    if len(lines) > pos + nv + nf:
        raise FormatError("trailing content after faces", path, lines[pos + nv + nf][0])
    return TriangleMesh(np.asarray(verts, dtype=np.float64).reshape(-1, 3),
                        np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def write_off(path, mesh: TriangleMesh) -> None:
    out = ["OFF", f"{len(mesh.vertices)} {len(mesh.faces)} 0"]
    out += [f"{x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    out += [f"3 {i} {j} {k}" for i, j, k in mesh.faces.tolist()]
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
