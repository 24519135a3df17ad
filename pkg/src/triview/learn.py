"""Gradient-descent fitting of per-camera confidence weights.

Weights enter the triangulation rows multiplicatively, so they are kept
nonnegative by a softplus parameterization of free real numbers. Fitting
is plain full-batch gradient descent on the mean damped-MSE between
triangulated joints and ground truth, with gradients flowing through the
analytic triangulation backward pass. By default one weight is shared per
camera across all joints; per-joint weights are opt-in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DivergedFit, EmptyDataset
from .evaluation import mpjpe
from .geometry import Rig
from .losses import soft_mse_loss
from .triangulation import (backward_weights_batch, design_rows_batch,
                            triangulate_batch)


def softplus(x):
    return np.logaddexp(0.0, np.asarray(x, dtype=float))


def inv_softplus(y):
    """Raw value whose softplus equals y (y > 0)."""
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


@dataclass(frozen=True)
class ConfidenceWeights:
    """Per-camera (optionally per-joint) confidence parameters.

    ``raw`` has shape (C,) when shared across joints or (C, J) otherwise;
    the effective weights are softplus(raw) >= 0.
    """

    raw: np.ndarray

    def __post_init__(self):
        r = np.array(self.raw, dtype=float)
        if not np.isfinite(r).all():
            raise ValueError("raw parameters must be finite")
        r.setflags(write=False)
        object.__setattr__(self, "raw", r)

    @property
    def effective(self):
        return softplus(self.raw)

    @property
    def shared(self) -> bool:
        return self.raw.ndim == 1

    @classmethod
    def uniform(cls, num_cameras: int, num_joints: int | None = None,
                value: float = 1.0):
        """Weights with every effective entry equal to ``value``."""
        shape = (num_cameras,) if num_joints is None else (num_cameras, num_joints)
        return cls(np.full(shape, inv_softplus(value)))

    def to_json(self, path):
        """Write the effective multipliers w_cj (not the raw parameters)."""
        eff = self.effective
        eff = eff if eff.ndim == 2 else eff[:, None]
        with open(path, "w") as f:
            json.dump({"weights": eff.tolist(),
                       "parameterization": "softplus-raw",
                       "shared_across_joints": self.shared}, f, indent=1,
                      sort_keys=True)
            f.write("\n")

    @classmethod
    def from_json(cls, path):
        """Rebuild from stored effective weights; they must be positive."""
        with open(path) as f:
            data = json.load(f)
        eff = np.array(data["weights"], dtype=float)
        if (eff <= 0).any():
            raise ValueError("stored weights must be positive to recover "
                             "raw parameters")
        if data.get("shared_across_joints", eff.shape[1] == 1):
            eff = eff[:, 0]
        return cls(inv_softplus(eff))


@dataclass(frozen=True)
class FitConfig:
    learning_rate: float = 0.01
    steps: int = 500
    seed: int = 0
    loss: str = "soft_mse"
    parameter_set: str = "algebraic_weights"
    per_joint: bool = False
    epsilon: float = 0.04

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.loss != "soft_mse":
            raise ValueError(f"unsupported loss {self.loss!r}")


def fit_weights(frames, rig: Rig, cfg: FitConfig = FitConfig()):
    """Fit confidence weights on synthetic frames; returns (weights, trace).

    ``frames`` is a list of synth.Frame. The loss is the mean soft MSE
    over every (frame, joint) instance with at least two visible views.
    The trace holds the loss at each step, before that step's update.
    """
    frames = list(frames)
    if not frames:
        raise EmptyDataset("fit_weights needs at least one frame")
    C = len(rig)
    J = frames[0].joints.shape[0]
    uv = np.stack([f.observations for f in frames])          # (F, C, J, 2)
    gt = np.stack([f.joints for f in frames])                # (F, J, 3)
    rows = design_rows_batch(rig.projections, np.swapaxes(uv, 1, 2))
    usable = (np.isfinite(uv).all(-1).sum(1) >= 2)           # (F, J)
    if not usable.any():
        raise EmptyDataset("no joint is visible in at least two views")
    n = int(usable.sum())

    raw = (np.full(C, inv_softplus(1.0)) if not cfg.per_joint
           else np.full((C, J), inv_softplus(1.0)))
    trace = np.empty(cfg.steps)
    for step in range(cfg.steps):
        w_eff = softplus(raw)                                # (C,) or (C,J)
        w = np.broadcast_to(w_eff.T if cfg.per_joint else w_eff, (J, C))[None]
        points, state = triangulate_batch(rows, w)
        losses, dX = soft_mse_loss(points, gt, cfg.epsilon)
        loss = float(losses[usable].mean())
        trace[step] = loss
        if not np.isfinite(loss):
            raise DivergedFit(f"loss became {loss} at step {step}")
        dX = np.where(usable[..., None], dX, 0.0) / n
        dw = backward_weights_batch(rows, state, dX)         # (F, J, C)
        if cfg.per_joint:
            g_eff = dw.sum(axis=0).T                         # (C, J)
        else:
            g_eff = dw.sum(axis=(0, 1))                      # (C,)
        # chain through softplus
        raw = raw - cfg.learning_rate * g_eff / (1.0 + np.exp(-raw))
    return ConfidenceWeights(raw), trace


def evaluate_weighted_vs_unweighted(frames, rig: Rig,
                                    weights: ConfidenceWeights):
    """Paired MPJPE (mm) of fitted vs uniform weights on held-out frames."""
    from .pipeline import algebraic_poses
    from .evaluation import Pose3D

    frames = list(frames)
    if not frames:
        raise EmptyDataset("no held-out frames to evaluate")
    uv = np.stack([f.observations for f in frames])
    gt = np.stack([f.joints for f in frames])
    report = {}
    for label, w in (("uniform", None), ("fitted", weights.effective)):
        points, valid, _ = algebraic_poses(rig, uv, w)
        errs = []
        for f in range(len(frames)):
            pred = Pose3D(joints=np.nan_to_num(points[f]), valid=valid[f])
            gtp = Pose3D(joints=gt[f])
            errs.append(mpjpe(pred, gtp))
        report[f"mpjpe_{label}_mm"] = float(np.mean(errs))
    report["ratio"] = report["mpjpe_fitted_mm"] / report["mpjpe_uniform_mm"]
    return report
