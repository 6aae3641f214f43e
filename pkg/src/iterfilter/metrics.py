"""Chamfer distance, point-to-mesh distance and distance histograms."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInput
from .geometry import KDTree, TriangleMesh, as_cloud, point_mesh_sq_dists

REPORT_SCALE = 1e5


def _nn_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    nearest = b[KDTree(b).nearest(a)]
    diff = a - nearest
    return (diff * diff).sum(axis=1)


def chamfer_distance(X, Y) -> float:
    """Mean squared NN distance X->Y plus the same for Y->X."""
    a, b = as_cloud(X), as_cloud(Y)
    return float(_nn_sq_dists(a, b).mean() + _nn_sq_dists(b, a).mean())


def point_to_mesh(X, mesh: TriangleMesh) -> float:
    """Mean over points of the squared distance to the nearest face."""
    return float(point_mesh_sq_dists(as_cloud(X), mesh).mean())


@dataclass
class Histogram:
    edges: list[float]
    counts: list[int]
    mean: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            w.writerow([repr(lo), repr(hi), c])
        return buf.getvalue()


def distance_histogram(X, mesh: TriangleMesh, bins: int = 50) -> Histogram:
    """Unsquared point-to-surface distances binned uniformly over ``[0, max]``."""
    if bins < 1:
        raise InvalidInput("bins must be >= 1")
    d = np.sqrt(point_mesh_sq_dists(as_cloud(X), mesh))
    hi = float(d.max())
    counts, edges = np.histogram(d, bins=bins, range=(0.0, hi if hi > 0 else 1.0))
    return Histogram([float(e) for e in edges], [int(c) for c in counts], float(d.mean()))


@dataclass
class EvalReport:
    cd: float
    p2m: float
    histogram: Histogram
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "cd_x1e5": self.cd * REPORT_SCALE,
            "p2m_x1e5": self.p2m * REPORT_SCALE,
            "cd": self.cd,
            "p2m": self.p2m,
            "histogram": asdict(self.histogram),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        h = d["histogram"]
        return cls(float(d["cd"]), float(d["p2m"]),
                   Histogram(list(h["edges"]), list(h["counts"]), float(h["mean"])),
                   dict(d.get("metadata", {})))


def evaluate(filtered, clean, mesh: TriangleMesh, bins: int = 50, metadata=None) -> EvalReport:
    return EvalReport(chamfer_distance(filtered, clean), point_to_mesh(filtered, mesh),
                      distance_histogram(filtered, mesh, bins), dict(metadata or {}))
