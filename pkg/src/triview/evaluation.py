"""Pose accuracy metrics and the camera-count sweep protocol."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .errors import NoValidJoints, PelvisMissing
from .geometry import Rig


@dataclass(frozen=True)
class Pose3D:
    """J joint positions in meters with a validity mask."""

    joints: np.ndarray
    valid: np.ndarray | None = None
    pelvis_index: int = 0

    def __post_init__(self):
        j = np.asarray(self.joints, dtype=float)
        if j.ndim != 2 or j.shape[1] != 3:
            raise ValueError(f"joints must be (J, 3), got {j.shape}")
        v = (np.ones(len(j), dtype=bool) if self.valid is None
             else np.asarray(self.valid, dtype=bool).copy())
        if len(v) != len(j):
            raise ValueError("valid mask length mismatch")
        if not (0 <= self.pelvis_index < len(j)):
            raise ValueError(f"pelvis_index {self.pelvis_index} out of range")
        if not np.isfinite(j[v]).all():
            raise ValueError("valid joints must be finite")
        j.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "joints", j)
        object.__setattr__(self, "valid", v)


def mpjpe(pred: Pose3D, gt: Pose3D, relative: bool = False) -> float:
    """Mean Euclidean joint error in millimeters over jointly-valid joints.

    With ``relative=True`` each pose's own pelvis is subtracted first,
    canceling any global translation offset.
    """
    both = pred.valid & gt.valid
    if not both.any():
        raise NoValidJoints("no joint is valid in both poses")
    p = pred.joints
    g = gt.joints
    if relative:
        pi = gt.pelvis_index
        if not (pred.valid[pred.pelvis_index] and gt.valid[pi]):
            raise PelvisMissing("relative MPJPE needs a valid pelvis in both poses")
        p = p - p[pred.pelvis_index]
        g = g - g[pi]
    err = np.linalg.norm(p[both] - g[both], axis=1)
    return float(err.mean() * 1000.0)


def _distinct_subsets(n_cameras: int, size: int, trials: int,
                      rng: np.random.Generator):
    """Up to ``trials`` distinct camera index subsets, seeded."""
    from math import comb
    total = comb(n_cameras, size)
    if total <= trials:
        return list(combinations(range(n_cameras), size))
    seen = set()
    while len(seen) < trials:
        pick = tuple(sorted(rng.choice(n_cameras, size=size, replace=False)))
        seen.add(pick)
    return sorted(seen)


def camera_subset_sweep(rig: Rig, frames, method, sizes, trials: int = 50,
                        seed: int = 0):
    """Mean absolute MPJPE per camera-subset size.

    For every size, samples up to ``trials`` distinct camera subsets
    (exhaustive when there are fewer), runs ``method(sub_rig, sub_frames)``
    -> (F, J, 3) predicted joints, and averages MPJPE over subsets and
    frames. Per-subset failures are counted in the report, not raised.

    Returns {"sizes": [...], "mpjpe_mm": [...], "errors": count}.
    """
    frames = list(frames)
    rng = np.random.default_rng(seed)
    means = []
    failures = 0
    for size in sizes:
        if not 2 <= size <= len(rig):
            raise ValueError(f"subset size {size} out of range for C={len(rig)}")
        vals = []
        for subset in _distinct_subsets(len(rig), size, trials, rng):
            sub_rig = rig.subset(subset)
            sub_frames = [replace(f, observations=f.observations[list(subset)],
                                  visible=f.visible[list(subset)],
                                  corrupted=f.corrupted[list(subset)])
                          for f in frames]
            try:
                points = np.asarray(method(sub_rig, sub_frames))
                per_frame = []
                for f, fr in enumerate(sub_frames):
                    ok = np.isfinite(points[f]).all(axis=1)
                    pred = Pose3D(joints=np.nan_to_num(points[f]), valid=ok)
                    per_frame.append(mpjpe(pred, Pose3D(joints=fr.joints)))
                vals.append(float(np.mean(per_frame)))
            except Exception:
                failures += 1
        means.append(float(np.mean(vals)) if vals else float("nan"))
    return {"sizes": list(sizes), "mpjpe_mm": means, "errors": failures}
