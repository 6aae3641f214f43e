"""Patch extraction and directed kNN graphs over patch coordinates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .geometry import KDTree, as_cloud

NOISY_PATCH_SIZE = 1000
CLEAN_PATCH_SIZE = 1200
GRAPH_K = 32


@dataclass(frozen=True)
class Patch:
    reference: np.ndarray
    member_indices: np.ndarray
    coords: np.ndarray

    def __len__(self):
        return len(self.member_indices)

    @property
    def radius(self) -> float:
        """Distance from the reference to the farthest member."""
        if len(self.coords) == 0:
            return 0.0
        return float(np.sqrt((self.coords ** 2).sum(axis=1).max()))


@dataclass(frozen=True)
class DirectedGraph:
    """Uniform out-degree kNN graph.  ``neighbors[i]`` lists the targets of the
    out-edges of vertex ``i`` in ascending distance order."""

    vertex_count: int
    neighbors: np.ndarray

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    @property
    def src(self) -> np.ndarray:
        return np.repeat(np.arange(self.vertex_count), self.k)

    @property
    def dst(self) -> np.ndarray:
        return self.neighbors.reshape(-1)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def __len__(self):
        return self.neighbors.size


def make_patch(cloud: np.ndarray, reference, size: int, tree: KDTree | None = None) -> Patch:
    """The ``size`` nearest neighbours of ``reference`` in ``cloud``, centered on it."""
    ref = np.asarray(reference, dtype=np.float64).reshape(3)
    tree = tree if tree is not None else KDTree(cloud)
    if size > tree.n:
        raise InvalidInput(f"patch of {size} points requested from a cloud of {tree.n}")
    idx = tree.query(ref.reshape(1, 3), size)[0]
    return Patch(ref, idx, tree.points[idx] - ref)


def extract_training_pair(noisy, clean, ref_index: int,
                          noisy_size: int = NOISY_PATCH_SIZE,
                          clean_size: int = CLEAN_PATCH_SIZE,
                          noisy_tree: KDTree | None = None,
                          clean_tree: KDTree | None = None) -> tuple[Patch, Patch]:
    noisy = as_cloud(noisy)
    clean = as_cloud(clean)
    if len(noisy) < noisy_size or len(clean) < clean_size:
        raise InvalidInput(f"need at least {noisy_size} noisy and {clean_size} clean points, "
                           f"got {len(noisy)} and {len(clean)}")
    if not 0 <= ref_index < len(noisy):
        raise InvalidInput(f"reference index {ref_index} out of range")
    ref = noisy[ref_index]
    return (make_patch(noisy, ref, noisy_size, noisy_tree),
            make_patch(clean, ref, clean_size, clean_tree))


def knn_graph(coords, k: int = GRAPH_K) -> DirectedGraph:
    pts = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        raise InvalidInput("cannot build a graph on an empty patch")
    deg = min(k, n - 1)
    if deg == 0:
        return DirectedGraph(n, np.empty((n, 0), dtype=np.int64))
    # every vertex is its own nearest neighbour at distance 0; ask for one
    # extra and drop self, which also handles duplicates deterministically
    nbrs = KDTree(pts).query(pts, deg + 1)
    rows = np.arange(n)[:, None]
    keep = nbrs != rows
    # rows where self was not returned (duplicate points with lower index) drop the last entry
    no_self = keep.all(axis=1)
    keep[no_self, -1] = False
    return DirectedGraph(n, nbrs[keep].reshape(n, deg))


def build_patch_graph(patch: Patch, k: int = GRAPH_K) -> DirectedGraph:
    return knn_graph(patch.coords, k)
