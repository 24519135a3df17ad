"""Training losses for the two triangulation routes.

Both losses operate in meters. The algebraic route uses a soft MSE whose
quadratic growth is damped above a threshold epsilon, so single bad
joints cannot dominate a batch; the volumetric route uses an L1 position
loss plus a weak log-likelihood regularizer that rewards probability mass
in the voxel containing the ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import JointOutsideGrid
from .volumetric import VoxelGridSpec, yaw_matrix

LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class LossConfig:
    epsilon: float = 0.04   # squared meters; (0.2 m)^2
    beta: float = 0.01

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


def soft_mse_loss(pred, gt, epsilon: float = 0.04):
    """Damped per-joint MSE: m if m < eps else m^0.1 * eps^0.9.

    m is the mean squared coordinate difference over the 3 components
    (so epsilon is directly comparable to a squared distance scale).
    Accepts (..., 3) arrays; returns ``(loss, grad)`` where loss has shape
    (...) and grad is d(loss)/d(pred) with pred's shape. The two branches
    meet continuously at m = eps.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    p = np.asarray(pred, dtype=float)
    g = np.asarray(gt, dtype=float)
    d = p - g
    m = (d * d).mean(axis=-1)
    soft = m >= epsilon
    # avoid 0^negative in the masked-out lanes
    m_safe = np.where(m > 0, m, 1.0)
    loss = np.where(soft, m_safe ** 0.1 * epsilon ** 0.9, m)
    dldm = np.where(soft, 0.1 * m_safe ** (-0.9) * epsilon ** 0.9, 1.0)
    grad = dldm[..., None] * (2.0 / 3.0) * d
    if loss.ndim == 0:
        return float(loss), grad
    return loss, grad


def gt_voxel_index(spec: VoxelGridSpec, point):
    """Grid index (i, j, k) of the voxel containing a world point.

    Raises JointOutsideGrid when the point falls outside the cube.
    """
    q = yaw_matrix(spec.yaw).T @ (np.asarray(point, dtype=float)
                                  - np.asarray(spec.anchor))
    idx = np.floor((q + spec.side_length / 2.0) / spec.pitch).astype(int)
    n = spec.resolution
    if (idx < 0).any() or (idx >= n).any():
        raise JointOutsideGrid(f"point {point} maps to voxel {tuple(idx)} "
                               f"outside the {n}^3 grid")
    return tuple(idx)


def vol_l1_loss(pred, gt, volumes, spec: VoxelGridSpec, beta: float = 0.01,
                valid=None):
    """L1 position loss with a weak peakiness regularizer.

    loss = sum_j |pred_j - gt_j|_1  -  beta * log V_j(voxel(gt_j))

    over joints where ``valid`` is set (default: all). ``volumes`` is the
    normalized (N, N, N, J) stack; the log argument is clamped below at
    1e-12. Returns ``(loss, grad_pred, reg_grad)``; grad_pred is the L1
    subgradient (0 exactly at a kink) and reg_grad maps joint -> (voxel
    index, d(loss)/d(volume value)) for the regularizer term.
    """
    p = np.asarray(pred, dtype=float)
    g = np.asarray(gt, dtype=float)
    vols = np.asarray(volumes)
    J = p.shape[0]
    mask = np.ones(J, dtype=bool) if valid is None else np.asarray(valid, bool)
    diff = p - g
    grad_pred = np.where(mask[:, None], np.sign(diff), 0.0)
    loss = float(np.abs(diff[mask]).sum())
    reg_grad = {}
    for j in range(J):
        if not mask[j]:
            continue
        idx = gt_voxel_index(spec, g[j])
        v = max(float(vols[idx + (j,)]), LOG_CLAMP)
        loss -= beta * np.log(v)
        reg_grad[j] = (idx, -beta / v)
    return loss, grad_pred, reg_grad
