"""DLT triangulation with confidence weights and an analytic backward pass.

The linear system: each observation (u, v) of camera P contributes rows
(u*P_row3 - P_row1) and (v*P_row3 - P_row2); a per-camera weight scales
both of its rows. The homogeneous point is the right singular vector of
the stacked matrix for the smallest singular value.

The backward pass differentiates that smallest singular vector by implicit
differentiation of the eigenproblem of B^T B: with v the minimizing unit
vector and lambda = sigma_min^2,

    dv = (lambda I - B^T B)^+ (dB^T B + B^T dB) v,

where the pseudoinverse acts on the orthogonal complement of v and is
assembled from the remaining singular triplets. Chaining through the
dehomogenization y = v[:3]/v[3] gives closed-form gradients with respect
to every pixel coordinate and weight. Validity requires a positive gap
between the two smallest singular values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateGeometry, DegenerateGradient, PointAtInfinity,
                     TooFewViews)
from .geometry import Rig, project_points

_GAP_RTOL = 1e-10        # singular gap below this (relative to sigma_1) is degenerate
_GRAD_GAP_RTOL = 1e-9    # backward refuses gaps below this (relative)
_W_EPS = 1e-12           # |homogeneous w| below this is a point at infinity


@dataclass(frozen=True)
class Observation:
    """A single 2D detection: camera index, pixel point, confidence weight."""

    camera_index: int
    point2d: tuple[float, float]
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"weight must be nonnegative, got {self.weight}")
        u, v = self.point2d
        if not (np.isfinite(u) and np.isfinite(v)):
            raise ValueError(f"point2d must be finite, got {self.point2d}")


@dataclass(frozen=True)
class _BackwardRecord:
    """Forward state needed to evaluate gradients later."""

    unweighted_rows: np.ndarray   # (2n, 4) rows before weighting
    weighted_rows: np.ndarray     # (2n, 4)
    singular_values: np.ndarray   # (4,)
    right_vectors: np.ndarray     # (4, 4) rows of V^T, sign-fixed last row
    weights: np.ndarray           # (n,)
    row3: np.ndarray              # (n, 4) third projection row per observation


@dataclass(frozen=True)
class TriangulationResult:
    point3d: np.ndarray
    homogeneous: np.ndarray
    per_view_residual: np.ndarray
    smallest_singular_value: float
    singular_gap: float
    backward: _BackwardRecord | None = field(default=None, repr=False)


def build_design_matrix(rig: Rig, observations) -> np.ndarray:
    """Stack weighted DLT rows for a set of observations; shape (2n, 4)."""
    A, B, _, _ = _design_matrices(rig, observations)
    return B


def _design_matrices(rig: Rig, observations):
    obs = list(observations)
    if len(obs) < 2:
        raise TooFewViews(f"need at least 2 observations, got {len(obs)}")
    n = len(obs)
    A = np.empty((2 * n, 4))
    w = np.empty(n)
    row3 = np.empty((n, 4))
    for i, ob in enumerate(obs):
        P = rig[ob.camera_index].projection
        u, v = ob.point2d
        A[2 * i] = u * P[2] - P[0]
        A[2 * i + 1] = v * P[2] - P[1]
        w[i] = ob.weight
        row3[i] = P[2]
    B = A * np.repeat(w, 2)[:, None]
    return A, B, w, row3


def triangulate(rig: Rig, observations, want_gradient: bool = False) -> TriangulationResult:
    """Weighted DLT triangulation of one 3D point.

    Requires at least two observations with positive weight. When
    ``want_gradient`` is set, the result carries the forward state needed
    by :func:`triangulate_backward`.
    """
    obs = list(observations)
    A, B, w, row3 = _design_matrices(rig, obs)
    if np.count_nonzero(w > 0) < 2:
        raise TooFewViews("need at least 2 observations with positive weight")
    _, S, Vt = np.linalg.svd(B)
    gap = S[2] - S[3]
    if gap < _GAP_RTOL * S[0]:
        raise DegenerateGeometry(
            f"singular gap {gap:.3e} below threshold (sigma_1 = {S[0]:.3e})")
    v = Vt[3]
    if abs(v[3]) < _W_EPS:
        raise PointAtInfinity(f"homogeneous w = {v[3]:.3e}")
    if v[3] < 0:
        v = -v
        Vt = Vt.copy()
        Vt[3] = v
    point = v[:3] / v[3]
    residuals = reprojection_residuals(rig, obs, point)
    record = None
    if want_gradient:
        record = _BackwardRecord(unweighted_rows=A, weighted_rows=B,
                                 singular_values=S, right_vectors=Vt,
                                 weights=w, row3=row3)
    return TriangulationResult(point3d=point, homogeneous=v,
                               per_view_residual=residuals,
                               smallest_singular_value=float(S[3]),
                               singular_gap=float(gap), backward=record)


def triangulate_backward(result: TriangulationResult, upstream):
    """Gradients of ``g . point3d`` for upstream gradient g.

    Returns ``(d_points, d_weights)`` with shapes (n, 2) and (n,): the
    loss gradient with respect to every observed pixel coordinate and
    every per-view weight.
    """
    rec = result.backward
    if rec is None:
        raise ValueError("triangulate(..., want_gradient=True) required")
    S = rec.singular_values
    if S[2] - S[3] < _GRAD_GAP_RTOL * S[2]:
        raise DegenerateGradient(
            f"smallest singular values {S[3]:.3e}, {S[2]:.3e} too close")
    dX = np.asarray(upstream, dtype=float)
    v = result.homogeneous
    X = result.point3d
    # gradient through dehomogenization: u_k = dL/dv_k
    u4 = np.empty(4)
    u4[:3] = dX / v[3]
    u4[3] = -(dX @ X) / v[3]
    # pseudoinverse of (lambda_min I - B^T B) on span{v_1..v_3}
    Vt = rec.right_vectors
    lam = S[3] ** 2
    coef = 1.0 / (lam - S[:3] ** 2)          # strictly negative
    Pp_u = Vt[:3].T @ (coef * (Vt[:3] @ u4))
    G = np.outer(Pp_u, v)
    dB = rec.weighted_rows @ (G + G.T)
    n = len(rec.weights)
    d_points = np.empty((n, 2))
    d_weights = np.empty(n)
    for i in range(n):
        wi = rec.weights[i]
        d_points[i, 0] = wi * (dB[2 * i] @ rec.row3[i])
        d_points[i, 1] = wi * (dB[2 * i + 1] @ rec.row3[i])
        d_weights[i] = (dB[2 * i] @ rec.unweighted_rows[2 * i]
                        + dB[2 * i + 1] @ rec.unweighted_rows[2 * i + 1])
    return d_points, d_weights


def reprojection_residuals(rig: Rig, observations, point3d) -> np.ndarray:
    """Pixel distance between each observation and the reprojected point.

    Views in which the point has near-zero depth get an infinite residual.
    """
    obs = list(observations)
    res = np.empty(len(obs))
    for i, ob in enumerate(obs):
        uv, z = project_points(rig[ob.camera_index], np.asarray(point3d)[None])
        if not np.isfinite(uv[0]).all():
            res[i] = np.inf
        else:
            res[i] = float(np.hypot(uv[0, 0] - ob.point2d[0], uv[0, 1] - ob.point2d[1]))
    return res


# ---------------------------------------------------------------------------
# Batched forms. These vectorize the exact same math over leading axes and
# exist because fitting and benchmarking triangulate tens of thousands of
# joints; results match the scalar path to floating-point roundoff.
# ---------------------------------------------------------------------------

def design_rows_batch(projections, uv):
    """DLT rows for a batch: uv (..., C, 2) -> rows (..., 2C, 4).

    NaN observations (invisible joints) produce zero rows, which is
    equivalent to dropping the view.
    """
    P = np.asarray(projections)
    uvc = np.nan_to_num(np.asarray(uv, dtype=float))
    valid = np.isfinite(np.asarray(uv, dtype=float)).all(-1)
    lead = uvc.shape[:-2]
    C = P.shape[0]
    A = np.empty(lead + (2 * C, 4))
    for c in range(C):
        rows_u = uvc[..., c, 0, None] * P[c, 2] - P[c, 0]
        rows_v = uvc[..., c, 1, None] * P[c, 2] - P[c, 1]
        m = valid[..., c, None]
        A[..., 2 * c, :] = np.where(m, rows_u, 0.0)
        A[..., 2 * c + 1, :] = np.where(m, rows_v, 0.0)
    return A


def triangulate_batch(rows, weights=None):
    """Solve batches of DLT systems; rows (..., 2C, 4).

    Returns ``(points, svd_state)`` where points has shape (..., 3) and
    svd_state = (B, S, Vt, v) feeds the batched backward. No degeneracy
    checks are performed here; callers own that policy.
    """
    A = np.asarray(rows)
    if weights is not None:
        w2 = np.repeat(np.asarray(weights, dtype=float), 2, axis=-1)
        B = A * w2[..., :, None]
    else:
        B = A
    _, S, Vt = np.linalg.svd(B)
    v = Vt[..., 3, :]
    sign = np.sign(v[..., 3:4])
    sign = np.where(sign == 0, 1.0, sign)
    v = v * sign
    points = v[..., :3] / v[..., 3:4]
    return points, (B, S, Vt, v)


def backward_weights_batch(rows, svd_state, upstream):
    """Batched d(loss)/d(weights): rows (..., 2C, 4) -> (..., C).

    ``upstream`` is d(loss)/d(point3d), shape (..., 3). Same implicit
    differentiation as triangulate_backward, vectorized.
    """
    A = np.asarray(rows)
    B, S, Vt, v = svd_state
    dX = np.asarray(upstream, dtype=float)
    # degenerate instances (zero rows, collapsed gaps) are expected to carry
    # zero upstream gradients; guard the divisions so they yield zeros
    # instead of NaNs that would poison whole-batch reductions
    w4 = v[..., 3:4]
    w4 = np.where(np.abs(w4) < _W_EPS, 1.0, w4)
    X = v[..., :3] / w4
    u4 = np.empty(v.shape)
    u4[..., :3] = dX / w4
    u4[..., 3] = -(dX * X).sum(-1) / w4[..., 0]
    lam = S[..., 3:4] ** 2
    denom = lam - S[..., :3] ** 2
    coef = np.where(denom != 0.0, 1.0 / np.where(denom == 0.0, 1.0, denom), 0.0)
    proj = np.einsum("...ik,...k->...i", Vt[..., :3, :], u4)
    Pp_u = np.einsum("...ik,...i->...k", Vt[..., :3, :], coef * proj)
    G = Pp_u[..., :, None] * v[..., None, :]
    dB = B @ (G + np.swapaxes(G, -1, -2))
    per_row = (dB * A).sum(-1)                     # (..., 2C)
    shape = per_row.shape[:-1] + (per_row.shape[-1] // 2, 2)
    return per_row.reshape(shape).sum(-1)
