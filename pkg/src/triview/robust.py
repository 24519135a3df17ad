"""RANSAC triangulation scored with the Huber loss.

The estimator samples two-view minimal sets, triangulates each pair,
scores the hypothesis by the summed Huber loss of all reprojection
residuals, picks inliers by a pixel threshold around the best hypothesis,
and refits an unweighted DLT solution on the inliers. All sampling is
driven by an explicit seed; identical inputs and seed give bit-identical
output.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import NoConsensus, TooFewViews, TriviewError
from .geometry import Rig
from .triangulation import (Observation, TriangulationResult,
                            reprojection_residuals, triangulate)


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 100
    sample_size: int = 2
    huber_delta: float = 5.0
    inlier_threshold: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.huber_delta <= 0 or self.inlier_threshold <= 0:
            raise ValueError("huber_delta and inlier_threshold must be positive")


def huber(residual, delta: float):
    """Quadratic inside |r| <= delta, linear outside; C1-continuous."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    r = np.abs(np.asarray(residual, dtype=float))
    out = np.where(r <= delta, 0.5 * r * r, delta * (r - 0.5 * delta))
    return out if out.ndim else float(out)


def _candidate_pairs(n_obs: int, cfg: RansacConfig, rng: np.random.Generator):
    pairs = list(combinations(range(n_obs), 2))
    if len(pairs) <= cfg.iterations:
        return pairs
    order = rng.permutation(len(pairs))[:cfg.iterations]
    return [pairs[i] for i in order]


def ransac_triangulate(rig: Rig, observations, cfg: RansacConfig = RansacConfig()):
    """Robust triangulation; returns (TriangulationResult, inlier_mask).

    When the number of camera pairs does not exceed the iteration budget
    the search is exhaustive; otherwise a seeded random subset of pairs is
    tried. Observation weights are ignored (the method is the unweighted
    baseline).
    """
    obs = list(observations)
    if len(obs) < 2:
        raise TooFewViews(f"need at least 2 observations, got {len(obs)}")
    rng = np.random.default_rng(cfg.seed)
    best_score = np.inf
    best_residuals = None
    for i, j in _candidate_pairs(len(obs), cfg, rng):
        pair = [Observation(obs[i].camera_index, obs[i].point2d),
                Observation(obs[j].camera_index, obs[j].point2d)]
        try:
            hyp = triangulate(rig, pair)
        except TriviewError:
            continue  # e.g. coincident cameras; skip the hypothesis
        residuals = reprojection_residuals(rig, obs, hyp.point3d)
        score = float(np.sum(huber(residuals, cfg.huber_delta)))
        if score < best_score:
            best_score = score
            best_residuals = residuals
    if best_residuals is None:
        raise NoConsensus("no camera pair produced a valid hypothesis")
    mask = best_residuals <= cfg.inlier_threshold
    if mask.sum() < 2:
        raise NoConsensus(f"best hypothesis keeps {int(mask.sum())} < 2 inliers")
    inlier_obs = [Observation(o.camera_index, o.point2d)
                  for o, keep in zip(obs, mask) if keep]
    refit = triangulate(rig, inlier_obs)
    # report residuals over *all* observations, not only inliers
    all_res = reprojection_residuals(rig, obs, refit.point3d)
    result = TriangulationResult(point3d=refit.point3d,
                                 homogeneous=refit.homogeneous,
                                 per_view_residual=all_res,
                                 smallest_singular_value=refit.smallest_singular_value,
                                 singular_gap=refit.singular_gap)
    return result, mask
