"""Analytic triangle meshes used as the desk-scale training/evaluation set."""
from __future__ import annotations

import numpy as np

from .geometry import TriangleMesh


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriangleMesh(np.asarray(verts) * radius, np.asarray(faces))


def _grid_faces(nu, nv, wrap_u=False, wrap_v=False):
    faces = []
    cu = nu if wrap_u else nu - 1
    cv = nv if wrap_v else nv - 1
    for i in range(cu):
        for j in range(cv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            faces += [(a, b, c), (a, c, d)]
    return faces


def torus(major: float = 0.7, minor: float = 0.3, nu: int = 48, nv: int = 24) -> TriangleMesh:
    u = np.linspace(0, 2 * np.pi, nu, endpoint=False)
    v = np.linspace(0, 2 * np.pi, nv, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    r = major + minor * np.cos(vv)
    verts = np.stack([r * np.cos(uu), r * np.sin(uu), minor * np.sin(vv)], axis=-1).reshape(-1, 3)
    return TriangleMesh(verts, np.asarray(_grid_faces(nu, nv, True, True)))


def cylinder(radius: float = 0.6, height: float = 1.2, nu: int = 48, nh: int = 16, nr: int = 8) -> TriangleMesh:
    """Closed cylinder; caps are triangulated as concentric rings."""
    u = np.linspace(0, 2 * np.pi, nu, endpoint=False)
    verts = []
    faces = []
    # side
    for z in np.linspace(-height / 2, height / 2, nh + 1):
        for a in u:
            verts.append((radius * np.cos(a), radius * np.sin(a), z))
    for i in range(nh):
        for j in range(nu):
            a = i * nu + j
            b = i * nu + (j + 1) % nu
            c = (i + 1) * nu + (j + 1) % nu
            d = (i + 1) * nu + j
            faces += [(a, b, c), (a, c, d)]
    # caps
    for z, flip in ((-height / 2, True), (height / 2, False)):
        ring_start = []
        for k in range(1, nr):
            ring_start.append(len(verts))
            rr = radius * k / nr
            verts += [(rr * np.cos(a), rr * np.sin(a), z) for a in u]
        outer = 0 if z < 0 else nh * nu
        ring_start.append(outer)
        centre = len(verts)
        verts.append((0.0, 0.0, z))
        first = ring_start[0]
        for j in range(nu):
            tri = (centre, first + j, first + (j + 1) % nu)
            faces.append(tri[::-1] if flip else tri)
        for r0, r1 in zip(ring_start[:-1], ring_start[1:]):
            for j in range(nu):
                a, b = r0 + j, r0 + (j + 1) % nu
                c, d = r1 + (j + 1) % nu, r1 + j
                quad = [(a, d, c), (a, c, b)]
                faces += [q[::-1] for q in quad] if flip else quad
    return TriangleMesh(np.asarray(verts), np.asarray(faces))


def rounded_box(half: float = 0.5, rounding: float = 0.15, n: int = 16) -> TriangleMesh:
    """Cube grid pushed onto a box with rounded edges and corners."""
    g = np.linspace(-half, half, n + 1)
    verts = []
    faces = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            base = len(verts)
            for a in g:
                for b in g:
                    p = [0.0, 0.0, 0.0]
                    p[axis] = sign * half
                    p[(axis + 1) % 3] = a
                    p[(axis + 2) % 3] = b
                    verts.append(p)
            for f in _grid_faces(n + 1, n + 1):
                f = tuple(base + i for i in f)
                faces.append(f if sign > 0 else f[::-1])
    v = np.asarray(verts)
    inner = half - rounding
    q = np.clip(v, -inner, inner)
    off = v - q
    v = q + rounding * off / np.linalg.norm(off, axis=1, keepdims=True)
    # shared edge vertices are duplicated per face; that is harmless for sampling and distances
    return TriangleMesh(v, np.asarray(faces))


def default_shapes() -> dict[str, TriangleMesh]:
    return {
        "icosphere": icosphere(3),
        "torus": torus(),
        "rounded_box": rounded_box(),
        "cylinder": cylinder(),
    }
