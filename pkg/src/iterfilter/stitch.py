"""Patch cover of a whole cloud and Gaussian-weighted selection across overlaps."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CoverError, InvalidInput
from .geometry import KDTree, as_cloud, farthest_point_sample
from .graph import NOISY_PATCH_SIZE, Patch
from .filter.model import RADIUS_GUARD, IterativePFNParams, patch_displacements

log = logging.getLogger(__name__)

PATCHES_PER_POINT_RATIO = 6  # 300 patches of 1000 points for 50K points
SUPPORT_FRACTION = 1.0 / 3.0


def gaussian_weights(sq_dists, radius: float) -> np.ndarray:
    r = max(float(radius), RADIUS_GUARD)
    rs = r * SUPPORT_FRACTION
    # subtracting the min exponent leaves the normalized weights unchanged
    z = -np.asarray(sq_dists, dtype=np.float64) / (rs * rs)
    e = np.exp(z - z.max())
    return e / e.sum()


def stitch_weights(patch: Patch) -> np.ndarray:
    """Normalized Gaussian proximity weights with support radius ``r / 3``,
    ``r`` being the distance from the reference to the farthest member."""
    d2 = (patch.coords ** 2).sum(axis=1)
    if len(d2) == 0:
        raise InvalidInput("empty patch")
    return gaussian_weights(d2, math.sqrt(d2.max()))


@dataclass
class StitchPlan:
    reference_indices: np.ndarray
    members: list[np.ndarray]
    weights: list[np.ndarray]
    radii: np.ndarray
    support_radii: np.ndarray
    n_points: int
    repairs: int = 0

    @property
    def R(self) -> int:
        return len(self.reference_indices)

    def covered(self) -> np.ndarray:
        mask = np.zeros(self.n_points, dtype=bool)
        for m in self.members:
            mask[m] = True
        return mask

    def stats(self) -> dict:
        return {"patches": int(self.R), "cover_repairs": int(self.repairs), "points": int(self.n_points)}


def reference_count(n: int, patch_size: int) -> int:
    return min(n, math.ceil(PATCHES_PER_POINT_RATIO * n / patch_size))


def build_stitch_plan(cloud, patch_size: int = NOISY_PATCH_SIZE, seed: int = 0) -> StitchPlan:
    pts = as_cloud(cloud)
    n = len(pts)
    size = min(patch_size, n)
    R = 1 if n <= patch_size else reference_count(n, patch_size)
    refs = [int(i) for i in farthest_point_sample(pts, R, seed)]
    tree = KDTree(pts)

    def patch_for(ref_idx):
        idx = tree.query(pts[ref_idx].reshape(1, 3), size)[0]
        d2 = ((pts[idx] - pts[ref_idx]) ** 2).sum(axis=1)
        r = math.sqrt(d2.max())
        return idx, gaussian_weights(d2, r), r

    members, weights, radii = [], [], []
    covered = np.zeros(n, dtype=bool)
    for ref in refs:
        idx, w, r = patch_for(ref)
        members.append(idx)
        weights.append(w)
        radii.append(r)
        covered[idx] = True
    repairs = 0
    while not covered.all():
        ref = int(np.flatnonzero(~covered)[0])
        idx, w, r = patch_for(ref)
        refs.append(ref)
        members.append(idx)
        weights.append(w)
        radii.append(r)
        covered[idx] = True
        repairs += 1
    radii = np.asarray(radii)
    plan = StitchPlan(np.asarray(refs, dtype=np.int64), members, weights, radii,
                      radii * SUPPORT_FRACTION, n, repairs)
    log.debug("stitch plan: %s", plan.stats())
    return plan


def _filter_all_patches(pts, model, plan, threads):
    def run(p):
        members = pts[plan.members[p]]
        return members + patch_displacements(members - pts[plan.reference_indices[p]], model)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(run, range(plan.R)))
    return [run(p) for p in range(plan.R)]


def select_outputs(pts, plan: StitchPlan, patch_outputs, selection: str = "weight") -> np.ndarray:
    """Pick, for every point, the result of one patch containing it.

    ``"weight"`` takes the patch where the point's stitch weight is largest;
    ``"nearest_reference"`` takes the patch whose reference point is nearest.
    Ties go to the earlier patch in the plan.
    """
    n = plan.n_points
    score = np.full(n, -np.inf)
    out = np.full((n, 3), np.nan)
    for p in range(plan.R):
        idx = plan.members[p]
        if selection == "weight":
            s = plan.weights[p]
        elif selection == "nearest_reference":
            s = -((pts[idx] - pts[plan.reference_indices[p]]) ** 2).sum(axis=1)
        else:
            raise InvalidInput(f"unknown selection rule {selection!r}")
        better = s > score[idx]
        score[idx[better]] = s[better]
        out[idx[better]] = patch_outputs[p][better]
    if not np.isfinite(score).all():
        raise CoverError(f"{int((~np.isfinite(score)).sum())} points not covered by any patch")
    return out


def filter_cloud(cloud, model: IterativePFNParams, plan: StitchPlan, selection: str = "weight",
                 threads: int = 1) -> np.ndarray:
    pts = as_cloud(cloud)
    if plan.n_points != len(pts):
        raise InvalidInput("plan was built for a different cloud")
    outputs = _filter_all_patches(pts, model, plan, threads)
    return select_outputs(pts, plan, outputs, selection)


def apply_external_iterations(cloud, model: IterativePFNParams, E: int = 1,
                              patch_size: int = NOISY_PATCH_SIZE, seed: int = 0,
                              selection: str = "weight", threads: int = 1) -> np.ndarray:
    """Run the full stitched filtering pass ``E`` times, re-planning patches on
    each pass from the current positions."""
    if E < 1:
        raise InvalidInput("E must be at least 1")
    pts = as_cloud(cloud)
    for _ in range(E):
        plan = build_stitch_plan(pts, patch_size, seed)
        pts = filter_cloud(pts, model, plan, selection, threads)
    return pts
