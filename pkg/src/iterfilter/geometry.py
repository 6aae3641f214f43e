"""Point clouds, triangle meshes, normalization and spatial queries.

Point clouds are plain ``(n, 3)`` float64 arrays; :func:`as_cloud` validates
and converts.  Nearest-neighbour ties are broken by lower index everywhere so
that results are reproducible bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInput

BRUTE_FORCE_BELOW = 64
LEAF_SIZE = 16


def as_cloud(points, allow_empty=False) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.size == 0 and allow_empty:
        return arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInput(f"expected an (n, 3) array of points, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidInput("point cloud is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("point cloud contains non-finite coordinates")
    return arr


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise InvalidInput("face index out of range")
        if not np.all(np.isfinite(v)):
            raise InvalidInput("mesh has non-finite vertices")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def triangles(self) -> np.ndarray:
        """``(F, 3, 3)`` array of face corner positions."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        t = self.triangles
        return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)

    def transformed(self, transform: "NormalizationTransform") -> "TriangleMesh":
        return TriangleMesh(transform.apply(self.vertices), self.faces)


@dataclass(frozen=True)
class NormalizationTransform:
    """Maps raw coordinates into the unit bounding sphere: ``(p - center) / radius``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        if not self.radius > 0:
            raise InvalidInput("normalization radius must be positive")

    def apply(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) / self.radius

    def invert(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.radius + self.center

    def to_dict(self) -> dict:
        return {"center": [float(c) for c in self.center], "radius": float(self.radius)}

    @classmethod
    def from_dict(cls, d) -> "NormalizationTransform":
        return cls(np.asarray(d["center"], dtype=np.float64), float(d["radius"]))


def ritter_bounding_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Ritter's approximate bounding sphere, with the radius tightened to the
    exact max distance from the final center."""
    p = as_cloud(points)
    d0 = ((p - p[0]) ** 2).sum(axis=1)
    y = p[int(np.argmax(d0))]
    z = p[int(np.argmax(((p - y) ** 2).sum(axis=1)))]
    center = 0.5 * (y + z)
    radius = 0.5 * float(np.sqrt(((y - z) ** 2).sum()))
    for q in p:
        dist = float(np.sqrt(((q - center) ** 2).sum()))
        if dist > radius:
            # grow just enough to include q, keeping the far side fixed
            new_radius = 0.5 * (radius + dist)
            center = center + (dist - new_radius) / dist * (q - center)
            radius = new_radius
    radius = float(np.sqrt(((p - center) ** 2).sum(axis=1).max()))
    return center, radius


def normalize_to_unit_sphere(cloud) -> tuple[np.ndarray, NormalizationTransform]:
    p = as_cloud(cloud)
    center, radius = ritter_bounding_sphere(p)
    if not radius > 0:
        radius = 1.0
    tf = NormalizationTransform(center, radius)
    return tf.apply(p), tf


def _sq_dists(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    diff = queries[:, None, :] - points[None, :, :]
    return (diff * diff).sum(axis=2)


def _brute_knn(queries: np.ndarray, points: np.ndarray, m: int, chunk: int = 256) -> np.ndarray:
    out = np.empty((len(queries), m), dtype=np.int64)
    for s in range(0, len(queries), chunk):
        d2 = _sq_dists(queries[s:s + chunk], points)
        # stable sort keeps lower index first among equal distances
        out[s:s + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :m]
    return out


class KDTree:
    """Exact kNN index. Immutable after construction.

    Backed by scipy's cKDTree for candidate generation; candidates are
    re-ranked with an exact squared-distance key and (distance, index)
    ordering, and rows where a tie could straddle the candidate boundary
    fall back to a brute-force scan.
    """

    def __init__(self, points):
        self.points = as_cloud(points)
        self.n = len(self.points)
        self._tree = None if self.n < BRUTE_FORCE_BELOW else cKDTree(self.points, leafsize=LEAF_SIZE)

    def query(self, queries, m: int) -> np.ndarray:
        q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        if m > self.n:
            raise InvalidInput(f"requested {m} neighbours from a cloud of {self.n} points")
        if m <= 0:
            return np.empty((len(q), 0), dtype=np.int64)
        if self._tree is None or m + 4 >= self.n:
            return _brute_knn(q, self.points, m)
        kq = min(self.n, m + 4)
        dist, idx = self._tree.query(q, k=kq)
        cand = self.points[idx]
        diff = cand - q[:, None, :]
        d2 = (diff * diff).sum(axis=2)
        order = np.argsort(idx, axis=1, kind="stable")
        idx = np.take_along_axis(idx, order, axis=1)
        d2 = np.take_along_axis(d2, order, axis=1)
        order = np.argsort(d2, axis=1, kind="stable")
        idx = np.take_along_axis(idx, order, axis=1)[:, :m]
        d2m = np.take_along_axis(d2, order, axis=1)[:, m - 1]
        # points beyond the candidate set are at least dist[:, -1] away
        bound = dist[:, -1] ** 2 * (1.0 - 1e-9)
        unsafe = ~(d2m < bound)
        if np.any(unsafe):
            rows = np.nonzero(unsafe)[0]
            idx[rows] = _brute_knn(q[rows], self.points, m)
        return idx

    def nearest(self, queries) -> np.ndarray:
        return self.query(queries, 1)[:, 0]


def knn(query, cloud, m: int) -> np.ndarray:
    """Indices of the ``m`` nearest points of ``cloud`` to ``query``, ascending
    by distance, ties broken by lower index."""
    pts = as_cloud(cloud)
    if m > len(pts):
        raise InvalidInput(f"m={m} exceeds cloud size {len(pts)}")
    return KDTree(pts).query(np.asarray(query, dtype=np.float64).reshape(1, 3), m)[0]


def farthest_point_sample(cloud, count: int, seed: int = 0, start: int | None = None) -> np.ndarray:
    """Greedy farthest point sampling.

    The first index is drawn from ``numpy.random.default_rng(seed)`` unless
    ``start`` is given.  Each next pick maximizes the squared distance to the
    selected set; ``np.argmax`` resolves ties toward the lower index.
    """
    pts = as_cloud(cloud)
    n = len(pts)
    if count < 1 or count > n:
        raise InvalidInput(f"cannot sample {count} reference points from {n}")
    if start is None:
        start = int(np.random.default_rng(seed).integers(n))
    selected = np.empty(count, dtype=np.int64)
    selected[0] = start
    mind = ((pts - pts[start]) ** 2).sum(axis=1)
    mind[start] = -np.inf
    for i in range(1, count):
        nxt = int(np.argmax(mind))
        selected[i] = nxt
        d = ((pts - pts[nxt]) ** 2).sum(axis=1)
        np.minimum(mind, d, out=mind)
        mind[nxt] = -np.inf
    return selected


def sample_mesh_uniform(mesh: TriangleMesh, n: int, seed: int = 0) -> np.ndarray:
    """Area-weighted face choice plus uniform barycentric coordinates."""
    areas = mesh.face_areas()
    total = areas.sum()
    if not total > 0:
        raise InvalidInput("mesh has no face with positive area")
    if n == 0:
        return np.empty((0, 3))
    rng = np.random.default_rng(seed)
    face = rng.choice(len(areas), size=n, p=areas / total)
    r1 = rng.random(n)
    r2 = rng.random(n)
    s = np.sqrt(r1)
    tri = mesh.triangles[face]
    return ((1.0 - s)[:, None] * tri[:, 0]
            + (s * (1.0 - r2))[:, None] * tri[:, 1]
            + (s * r2)[:, None] * tri[:, 2])


def _segment_sq_dist(p, a, b):
    ab = b - a
    denom = (ab * ab).sum(-1)
    t = np.where(denom > 0, ((p - a) * ab).sum(-1) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    d = p - (a + t[..., None] * ab)
    return (d * d).sum(-1)


def closest_points_on_triangles(p, a, b, c) -> np.ndarray:
    """Element-wise closest point on triangle ``(a, b, c)`` to ``p`` (all ``(N, 3)``),
    by Voronoi-region classification.  Degenerate triangles are not handled here."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = (ab * ap).sum(-1)
    d2 = (ac * ap).sum(-1)
    bp = p - b
    d3 = (ab * bp).sum(-1)
    d4 = (ac * bp).sum(-1)
    cp = p - c
    d5 = (ab * cp).sum(-1)
    d6 = (ac * cp).sum(-1)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def take(mask, value):
        sel = mask & ~done
        out[sel] = value[sel] if np.ndim(value) == 2 else value
        done[sel] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        take((d1 <= 0) & (d2 <= 0), a)
        take((d3 >= 0) & (d4 <= d3), b)
        v = d1 / (d1 - d3)
        take((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v[:, None] * ab)
        take((d6 >= 0) & (d5 <= d6), c)
        w = d2 / (d2 - d6)
        take((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w[:, None] * ac)
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        take((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + w[:, None] * (c - b))
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        take(np.ones(len(p), dtype=bool), a + ab * v[:, None] + ac * w[:, None])
    return out


def _degenerate(a, b, c) -> np.ndarray:
    ab, ac = b - a, c - a
    cr = np.cross(ab, ac)
    cr2 = (cr * cr).sum(-1)
    scale = (ab * ab).sum(-1) * (ac * ac).sum(-1)
    return cr2 <= 1e-24 * scale


def point_triangle_sq_dists(p, tris) -> np.ndarray:
    """Element-wise squared distance from ``p[i]`` to triangle ``tris[i]``."""
    p = np.asarray(p, dtype=np.float64).reshape(-1, 3)
    tris = np.asarray(tris, dtype=np.float64).reshape(-1, 3, 3)
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    out = np.empty(len(p))
    deg = _degenerate(a, b, c)
    ok = ~deg
    if np.any(ok):
        q = closest_points_on_triangles(p[ok], a[ok], b[ok], c[ok])
        diff = p[ok] - q
        out[ok] = (diff * diff).sum(-1)
    if np.any(deg):
        pd, ad, bd, cd = p[deg], a[deg], b[deg], c[deg]
        out[deg] = np.minimum(np.minimum(_segment_sq_dist(pd, ad, bd), _segment_sq_dist(pd, bd, cd)),
                              _segment_sq_dist(pd, cd, ad))
    return out


def point_to_triangle_distance(p, tri) -> float:
    """Exact Euclidean distance from ``p`` to the closed triangle ``tri`` (3x3)."""
    return float(np.sqrt(point_triangle_sq_dists(np.reshape(p, (1, 3)), np.reshape(tri, (1, 3, 3)))[0]))


def point_mesh_sq_dists(points, mesh: TriangleMesh) -> np.ndarray:
    """Squared distance from every point to the nearest face of ``mesh``.

    Faces are pruned with centroid bounding spheres: the distance to the
    nearest centroid bounds the answer from above, and a face whose sphere
    lies beyond that bound cannot be closest.
    """
    pts = as_cloud(points)
    tris = mesh.triangles
    if len(tris) == 0:
        raise InvalidInput("mesh has no faces")
    cent = tris.mean(axis=1)
    rad = np.sqrt(((tris - cent[:, None, :]) ** 2).sum(-1).max(axis=1))
    rmax = float(rad.max())
    tree = cKDTree(cent, leafsize=LEAF_SIZE)
    ub, _ = tree.query(pts, k=1)
    out = np.empty(len(pts))
    cands = tree.query_ball_point(pts, ub + rmax + 1e-12)
    # flatten (point, face) candidate pairs and evaluate in bulk
    lens = np.fromiter((len(c) for c in cands), dtype=np.int64, count=len(pts))
    pi = np.repeat(np.arange(len(pts)), lens)
    fi = np.fromiter((f for c in cands for f in c), dtype=np.int64, count=int(lens.sum()))
    d2 = point_triangle_sq_dists(pts[pi], tris[fi])
    out.fill(np.inf)
    np.minimum.at(out, pi, d2)
    return out
