"""Voxel grids: construction, per-view unprojection, aggregation, 3D soft-argmax.

A volume is a float array of shape (N, N, N, K): axes (i, j, k) index the
grid along world x, y, z of the *yawed* grid frame, and K is the channel
count (one channel per joint in this package). Voxel (i, j, k) is centered
at ``anchor + R_yaw @ ((i+.5, j+.5, k+.5) * pitch - L/2)`` where
``pitch = L / N`` and R_yaw rotates about the vertical Y axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadConfidence, SpecMismatch
from .geometry import Camera, CropTransform, heatmap_projection

_DEPTH_EPS = 1e-9


@dataclass(frozen=True)
class VoxelGridSpec:
    """Geometry of a cubic voxel grid centered on an anchor point."""

    anchor: tuple[float, float, float]
    side_length: float = 2.5
    resolution: int = 64
    yaw: float = 0.0

    def __post_init__(self):
        if self.side_length <= 0:
            raise ValueError("side_length must be positive")
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")
        object.__setattr__(self, "anchor", tuple(float(a) for a in self.anchor))

    @property
    def pitch(self) -> float:
        """Edge length of one voxel in meters."""
        return self.side_length / self.resolution


def yaw_matrix(yaw: float):
    """Right-handed rotation about the +Y (vertical) axis."""
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _local_axis(spec: VoxelGridSpec):
    n = spec.resolution
    return (np.arange(n) + 0.5) * spec.pitch - spec.side_length / 2.0


def voxel_world_coords(spec: VoxelGridSpec):
    """(N, N, N, 3) world coordinates of every voxel center."""
    ax = _local_axis(spec)
    gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
    local = np.stack([gx, gy, gz], axis=-1)
    return local @ yaw_matrix(spec.yaw).T + np.asarray(spec.anchor)


def bilinear_sample(values, uv):
    """Bilinear interpolation of (H, W) or (H, W, K) maps at (x, y) points.

    ``uv`` has shape (..., 2). Coordinates outside [0, W-1] x [0, H-1]
    return 0 (zero padding). Output shape is uv.shape[:-1] (+ (K,)).
    """
    m = np.asarray(values)
    squeeze = m.ndim == 2
    if squeeze:
        m = m[..., None]
    H, W, _ = m.shape
    uv = np.asarray(uv, dtype=float)
    x, y = uv[..., 0], uv[..., 1]
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    out = np.zeros(uv.shape[:-1] + (m.shape[2],), dtype=m.dtype)
    for dx in (0, 1):
        for dy in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            inb = (xi >= 0) & (xi < W) & (yi >= 0) & (yi < H)
            wgt = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            sample = m[np.clip(yi, 0, H - 1), np.clip(xi, 0, W - 1)]
            out += np.where(inb[..., None], wgt * sample, 0.0)
    return out[..., 0] if squeeze else out


def unproject_view(camera: Camera, crop: CropTransform, maps, spec: VoxelGridSpec):
    """Fill a volume with heatmap samples at each voxel's projection.

    ``maps`` is an (H, W, K) channel stack in heatmap coordinates; ``crop``
    maps heatmap coordinates to image pixels and is inverted internally.
    Voxels projecting behind the camera (depth <= eps) receive 0.

    Returns ``(volume, n_behind)`` where n_behind counts behind-camera
    voxels for visibility diagnostics.
    """
    m = np.asarray(maps)
    if m.ndim == 2:
        m = m[..., None]
    P = heatmap_projection(camera, crop)
    pts = voxel_world_coords(spec).reshape(-1, 3)
    ph = np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)
    p = ph @ P.T
    z = p[:, 2]
    front = z > _DEPTH_EPS
    denom = np.where(front, z, 1.0)
    uv = p[:, :2] / denom[:, None]
    # push behind-camera voxels far out of bounds so sampling yields 0
    uv[~front] = -1e9
    vals = bilinear_sample(m, uv)
    n = spec.resolution
    return vals.reshape(n, n, n, m.shape[2]), int((~front).sum())


def aggregate(volumes, mode: str, conf=None):
    """Combine per-view volumes across cameras.

    mode 'sum':      sum_c V_c
    mode 'conf':     sum_c d_c V_c / sum_c d_c   (requires conf = d, d >= 0)
    mode 'softmax':  per voxel per channel, softmax-weighted sum across
                     cameras: sum_c softmax_c(V)_c * V_c, overflow-safe.
    """
    stacks = [np.asarray(v) for v in volumes]
    shapes = {v.shape for v in stacks}
    if len(shapes) != 1:
        raise SpecMismatch(f"volume shapes differ: {sorted(shapes)}")
    vols = np.stack(stacks)
    if mode == "sum":
        return vols.sum(axis=0)
    if mode == "conf":
        if conf is None:
            raise BadConfidence("conf mode requires confidence multipliers")
        d = np.asarray(conf, dtype=float)
        if d.shape != (vols.shape[0],) or (d < 0).any():
            raise BadConfidence(f"need {vols.shape[0]} nonnegative multipliers")
        total = d.sum()
        if total <= 0:
            raise BadConfidence("confidence multipliers sum to zero")
        return np.tensordot(d, vols, axes=1) / total
    if mode == "softmax":
        mx = vols.max(axis=0, keepdims=True)
        e = np.exp(vols - mx)
        return (e * vols).sum(axis=0) / e.sum(axis=0)
    raise ValueError(f"unknown aggregation mode {mode!r}")


def volumetric_softmax(values, alpha: float = 1.0):
    """Per-channel softmax over the three spatial axes; channels sum to 1."""
    v = np.asarray(values, dtype=float) * alpha
    mx = v.max(axis=(0, 1, 2), keepdims=True)
    e = np.exp(v - mx)
    return e / e.sum(axis=(0, 1, 2), keepdims=True)


def soft_argmax_3d(p, spec: VoxelGridSpec):
    """Per-channel expectation of voxel world centers; shape (K, 3)."""
    p = np.asarray(p, dtype=float)
    coords = voxel_world_coords(spec).reshape(-1, 3)
    flat = p.reshape(-1, p.shape[3])
    return flat.T @ coords


def soft_argmax_3d_backward(spec: VoxelGridSpec):
    """Jacobian of soft_argmax_3d per channel: d(pos_k)/d(p(v)) = coord_k(v).

    Shape (3, N, N, N); identical for every channel.
    """
    coords = voxel_world_coords(spec)
    return np.moveaxis(coords, -1, 0)


def localize_3d(values, spec: VoxelGridSpec, alpha: float = 1.0):
    """Soft-argmax of volumetric_softmax(values, alpha), with gradient.

    Returns ``(pos, grad)``: pos (K, 3) world meters; grad (K, 3, N, N, N)
    with d(pos_k)/d(values(v)) = alpha * p(v) * (coord_k(v) - pos_k).
    """
    p = volumetric_softmax(values, alpha)
    pos = soft_argmax_3d(p, spec)
    coords = soft_argmax_3d_backward(spec)            # (3, N, N, N)
    pk = np.moveaxis(p, -1, 0)                        # (K, N, N, N)
    diff = coords[None] - pos[:, :, None, None, None]
    return pos, alpha * pk[:, None] * diff


def refine_volume(values):
    """Volume refinement hook; the default is the identity.

    Swap in a learned refiner with the same (N, N, N, K) -> (N, N, N, K)
    signature to post-process aggregated volumes before localization.
    """
    return values
