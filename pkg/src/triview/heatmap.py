"""2D heatmaps: Gaussian rendering, spatial softmax, and soft-argmax.

A heatmap is a plain float array of shape (H, W), row-major with y as the
outer axis, holding one scalar per pixel center. Grid coordinates follow
the package-wide convention that integer coordinate i is the center of
cell i, with x in [0, W) and y in [0, H).
"""

from __future__ import annotations

import numpy as np

DEFAULT_ALPHA = 100.0


def spatial_softmax(values, alpha: float = DEFAULT_ALPHA):
    """Softmax over all pixels with inverse temperature alpha.

    Computed with max subtraction so large alpha cannot overflow. The
    result is nonnegative and sums to 1.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    v = np.asarray(values, dtype=float) * alpha
    v = v - v.max()
    e = np.exp(v)
    return e / e.sum()


def grid_coords_2d(height: int, width: int):
    """(2, H, W) array of x and y cell-center coordinates."""
    ys, xs = np.mgrid[0:height, 0:width].astype(float)
    return np.stack([xs, ys])


def soft_argmax_2d(p):
    """Center of mass of a normalized heatmap, as (x, y) grid coordinates."""
    p = np.asarray(p, dtype=float)
    coords = grid_coords_2d(*p.shape)
    return np.array([(coords[0] * p).sum(), (coords[1] * p).sum()])


def soft_argmax_2d_backward(height: int, width: int):
    """Jacobian of soft_argmax_2d w.r.t. the normalized heatmap.

    Row k holds d(coord_k)/d(p(r)) = r_k, i.e. just the coordinate grids;
    shape (2, H, W).
    """
    return grid_coords_2d(height, width)


def localize_2d(values, alpha: float = DEFAULT_ALPHA):
    """Soft-argmax of spatial_softmax(values, alpha), with gradient.

    Returns ``(xy, grad)`` where grad has shape (2, H, W) and holds
    d(xy_k)/d(values(r)) = alpha * p(r) * (r_k - xy_k), the chain of the
    softmax and expectation steps.
    """
    p = spatial_softmax(values, alpha)
    xy = soft_argmax_2d(p)
    coords = grid_coords_2d(*p.shape)
    grad = alpha * p[None] * (coords - xy[:, None, None])
    return xy, grad


def render_gaussian(center, sigma: float, width: int, height: int):
    """Unnormalized Gaussian bump exp(-||r - center||^2 / (2 sigma^2)).

    The peak value is 1 when the center lies exactly on a cell.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    cx, cy = float(center[0]), float(center[1])
    xs = np.arange(width, dtype=float)
    ys = np.arange(height, dtype=float)
    gx = np.exp(-((xs - cx) ** 2) / (2.0 * sigma * sigma))
    gy = np.exp(-((ys - cy) ** 2) / (2.0 * sigma * sigma))
    return gy[:, None] * gx[None, :]
