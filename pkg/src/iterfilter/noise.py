"""Synthetic noise models applied to normalized clean clouds.

All draws come from ``numpy.random.Generator(PCG64(seed))`` and are made in a
single vectorized call per spec, so a given ``(cloud, spec)`` always yields
the same bits.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .errors import InvalidInput
from .geometry import as_cloud


class NoiseKind(str, Enum):
    ISOTROPIC_GAUSSIAN = "IsotropicGaussian"
    ANISOTROPIC_GAUSSIAN = "AnisotropicGaussian"
    DISCRETE = "Discrete"
    LAPLACE = "Laplace"
    UNIFORM_SPHERE = "UniformSphere"


# unit-scale covariance of the anisotropic model; multiplied by scale**2
ANISOTROPIC_COV = np.array([[1.0, -0.5, -0.25],
                            [-0.5, 1.0, -0.25],
                            [-0.25, -0.25, 1.0]])

# outcome table for discrete noise: origin w.p. 0.4, each signed axis step w.p. 0.1
DISCRETE_OUTCOMES = np.array([[0, 0, 0],
                              [1, 0, 0], [-1, 0, 0],
                              [0, 1, 0], [0, -1, 0],
                              [0, 0, 1], [0, 0, -1]], dtype=np.float64)
DISCRETE_PROBS = np.array([0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1])


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = NoiseKind.ISOTROPIC_GAUSSIAN
    scale: float = 0.02
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not (self.scale >= 0) or not np.isfinite(self.scale):
            raise InvalidInput(f"noise scale must be a finite non-negative number, got {self.scale}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d) -> "NoiseSpec":
        return cls(NoiseKind(d["kind"]), float(d["scale"]), int(d["seed"]))


def sample_noise(n: int, kind: NoiseKind, scale: float, rng: np.random.Generator) -> np.ndarray:
    """``(n, 3)`` displacement vectors for the given model."""
    kind = NoiseKind(kind)
    if kind is NoiseKind.ISOTROPIC_GAUSSIAN:
        return scale * rng.standard_normal((n, 3))
    if kind is NoiseKind.ANISOTROPIC_GAUSSIAN:
        chol = np.linalg.cholesky(ANISOTROPIC_COV)
        return scale * rng.standard_normal((n, 3)) @ chol.T
    if kind is NoiseKind.DISCRETE:
        pick = rng.choice(len(DISCRETE_PROBS), size=n, p=DISCRETE_PROBS)
        return scale * DISCRETE_OUTCOMES[pick]
    if kind is NoiseKind.LAPLACE:
        # scale is the Laplace scale parameter b, independently per axis
        return rng.laplace(0.0, scale, size=(n, 3))
    if kind is NoiseKind.UNIFORM_SPHERE:
        g = rng.standard_normal((n, 3))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        r = scale * np.cbrt(rng.random((n, 1)))
        v = g / norms * r
        # rounding can push |v| a hair past r
        vn = np.linalg.norm(v, axis=1, keepdims=True)
        over = vn > scale
        if np.any(over):
            v = np.where(over, v * (scale / np.where(over, vn, 1.0)), v)
        return v
    raise InvalidInput(f"unknown noise kind {kind!r}")


def add_noise(cloud, spec: NoiseSpec) -> np.ndarray:
    pts = as_cloud(cloud)
    if spec.scale == 0:
        return pts.copy()
    rng = np.random.default_rng(spec.seed)
    return pts + sample_noise(len(pts), spec.kind, spec.scale, rng)
