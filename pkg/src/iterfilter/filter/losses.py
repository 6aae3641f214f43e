"""Noise schedule, adaptive targets and the two nearest-neighbour training losses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput
from ..geometry import KDTree
from ..graph import Patch
from ..nn import tensor as T
from ..nn.tensor import Tensor
from .model import MAX_ITERATIONS, MIN_ITERATIONS

DECAY_NUMERATOR = 16.0


@dataclass(frozen=True)
class NoiseSchedule:
    sigma0: float
    T: int
    delta: float
    sigmas: tuple[float, ...]


def noise_schedule(sigma0: float, T: int) -> NoiseSchedule:
    """``sigma_{t+1} = sigma_t / delta`` with ``delta = 16 / T`` and a final 0.

    ``T = 1`` is accepted as the degenerate single-module case (``[0]``).
    """
    if not MIN_ITERATIONS <= T <= MAX_ITERATIONS:
        raise InvalidInput(f"T must lie in [{MIN_ITERATIONS}, {MAX_ITERATIONS}], got {T}")
    if not sigma0 > 0:
        raise InvalidInput("sigma0 must be positive")
    delta = DECAY_NUMERATOR / T
    sigmas = []
    s = float(sigma0)
    for _ in range(T - 1):
        s = s / delta
        sigmas.append(s)
    sigmas.append(0.0)
    return NoiseSchedule(float(sigma0), T, delta, tuple(sigmas))


def make_adaptive_target(clean: Patch, sigma_tau: float, seed=None, rng: np.random.Generator | None = None) -> Patch:
    """Clean patch plus isotropic Gaussian noise of std ``sigma_tau``."""
    if sigma_tau < 0:
        raise InvalidInput("sigma_tau must be non-negative")
    if sigma_tau == 0:
        return clean
    rng = rng if rng is not None else np.random.default_rng(seed)
    coords = clean.coords + sigma_tau * rng.standard_normal(clean.coords.shape)
    return Patch(clean.reference, clean.member_indices, coords)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _nn_loss(displacements, positions, targets, weights) -> Tensor:
    if len(displacements) != len(targets) or len(positions) < len(displacements):
        raise InvalidInput(f"got {len(displacements)} displacements, {len(positions)} positions "
                           f"and {len(targets)} targets")
    if not displacements:
        raise InvalidInput("empty displacement stack")
    w = np.asarray(weights, dtype=np.float64)
    total = None
    trees = {}
    for d, x_prev, y in zip(displacements, positions, targets):
        d, x_prev = _as_tensor(d), _as_tensor(x_prev)
        y = np.asarray(y.coords if isinstance(y, Patch) else y, dtype=np.float64)
        key = id(y)
        if key not in trees:
            trees[key] = (KDTree(y), y)
        tree, _ = trees[key]
        # index choice is a constant of the current values
        nearest = y[tree.nearest(x_prev.data)]
        # d - (nearest - x_prev)
        resid = T.sub(T.add(d, x_prev), nearest)
        term = T.weighted_sq_norm_sum(resid, w)
        total = term if total is None else T.add(total, term)
    return total


def loss_adaptive(displacements, positions, targets, weights) -> Tensor:
    """``sum_t sum_i w_i ||d_i^t - (NN(x_i^{t-1}, Y^t) - x_i^{t-1})||^2``.

    ``positions[t]`` is the input to module ``t`` (so ``positions[0]`` is the
    noisy patch) and ``targets[t]`` the adaptive target for that module.
    """
    return _nn_loss(displacements, positions, targets, weights)


def loss_fixed(displacements, positions, clean, weights) -> Tensor:
    """Same as :func:`loss_adaptive` with the clean patch as every iteration's target."""
    return _nn_loss(displacements, positions, [clean] * len(displacements), weights)
