"""Pinhole cameras, rigs, and crop transforms.

Conventions used throughout the package:

* World coordinates are in meters, Y up.
* Image coordinates are in pixels, x right, y down; the integer coordinate
  ``i`` denotes the *center* of pixel ``i`` (no half-pixel offsets anywhere).
* A camera is a 3x4 row-major projection matrix ``P`` mapping homogeneous
  world points to homogeneous pixels: ``[u*w, v*w, w] = P @ [X, Y, Z, 1]``.
* Crop transforms map heatmap grid coordinates to full-image pixels via
  ``image = offset + scale * heatmap`` per axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateProjection, SingularCamera

_DEPTH_EPS = 1e-12


def compose(K, R, t):
    """Assemble a 3x4 projection matrix from intrinsics and extrinsics."""
    K = np.asarray(K, dtype=float)
    R = np.asarray(R, dtype=float)
    t = np.asarray(t, dtype=float).reshape(3)
    return K @ np.hstack([R, t[:, None]])


def decompose(projection):
    """Split a projection matrix into (K, R, t) by RQ decomposition.

    K is upper triangular with positive diagonal and K[2,2] = 1; R is a
    proper rotation (det +1). Raises SingularCamera when the left 3x3
    block has rank < 3.
    """
    P = np.asarray(projection, dtype=float)
    M = P[:, :3]
    if np.linalg.matrix_rank(M, tol=1e-10 * max(np.linalg.norm(M), 1e-300)) < 3:
        raise SingularCamera("left 3x3 block of the projection is singular")
    K, R = scipy.linalg.rq(M)
    # force a positive diagonal on K, pushing sign flips into R
    signs = np.sign(np.diag(K))
    signs[signs == 0] = 1.0
    K = K * signs[None, :]
    R = R * signs[:, None]
    # P and -P describe the same camera; if R came out improper, flip to
    # the -P interpretation and keep the translation consistent with it
    s = 1.0
    if np.linalg.det(R) < 0:
        R = -R
        s = -1.0
    t = np.linalg.solve(K, s * P[:, 3])
    scale = K[2, 2]
    return K / scale, R, t


@dataclass(frozen=True)
class Camera:
    """A calibrated pinhole camera.

    Either construct directly from a projection matrix or use
    :meth:`from_krt`. When intrinsics/extrinsics are supplied they must
    reproduce the projection matrix.
    """

    name: str
    projection: np.ndarray
    image_size: tuple[int, int]
    K: np.ndarray | None = None
    R: np.ndarray | None = None
    t: np.ndarray | None = None

    def __post_init__(self):
        P = np.array(self.projection, dtype=float)
        if P.shape != (3, 4):
            raise ValueError(f"projection must be 3x4, got {P.shape}")
        P.setflags(write=False)
        object.__setattr__(self, "projection", P)
        w, h = self.image_size
        if not (int(w) > 0 and int(h) > 0):
            raise ValueError(f"image_size must be positive, got {self.image_size}")
        object.__setattr__(self, "image_size", (int(w), int(h)))
        if self.K is not None:
            K = np.array(self.K, dtype=float)
            R = np.array(self.R, dtype=float)
            t = np.array(self.t, dtype=float).reshape(3)
            if not np.allclose(R @ R.T, np.eye(3), atol=1e-9) or np.linalg.det(R) < 0:
                raise ValueError("R must be orthonormal with determinant +1")
            recomposed = compose(K, R, t)
            if not np.allclose(recomposed, P, rtol=1e-9, atol=1e-9 * np.abs(P).max()):
                raise ValueError("K[R|t] does not reproduce the projection matrix")
            for a in (K, R, t):
                a.setflags(write=False)
            object.__setattr__(self, "K", K)
            object.__setattr__(self, "R", R)
            object.__setattr__(self, "t", t)

    @classmethod
    def from_krt(cls, name, K, R, t, image_size):
        return cls(name=name, projection=compose(K, R, t), image_size=image_size,
                   K=np.asarray(K, float), R=np.asarray(R, float),
                   t=np.asarray(t, float))


def project(camera: Camera, point) -> tuple[float, float, float]:
    """Project a world point; returns (u, v, depth) in pixels/meters."""
    p = camera.projection @ np.append(np.asarray(point, dtype=float), 1.0)
    if abs(p[2]) < _DEPTH_EPS:
        raise DegenerateProjection(
            f"point {point} has near-zero depth in camera {camera.name!r}")
    return p[0] / p[2], p[1] / p[2], p[2]


def project_points(camera: Camera, points):
    """Vectorized projection of (M,3) world points.

    Returns ``(uv, depth)`` with shapes (M,2) and (M,). Rows with
    |depth| < 1e-12 come back as NaN rather than raising, so callers can
    apply their own visibility policy.
    """
    pts = np.asarray(points, dtype=float)
    ph = np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1)
    p = ph @ camera.projection.T
    z = p[..., 2]
    safe = np.abs(z) >= _DEPTH_EPS
    denom = np.where(safe, z, 1.0)
    uv = p[..., :2] / denom[..., None]
    uv[~safe] = np.nan
    return uv, z


@dataclass(frozen=True)
class Rig:
    """An ordered collection of cameras with unique names."""

    cameras: tuple[Camera, ...]

    def __post_init__(self):
        cams = tuple(self.cameras)
        if len(cams) < 1:
            raise ValueError("a rig needs at least one camera")
        names = [c.name for c in cams]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate camera names: {names}")
        object.__setattr__(self, "cameras", cams)

    def __len__(self):
        return len(self.cameras)

    def __getitem__(self, index) -> Camera:
        return self.cameras[index]

    def subset(self, indices) -> "Rig":
        """A new rig holding the cameras at ``indices`` (order preserved)."""
        return Rig(tuple(self.cameras[i] for i in indices))

    @property
    def projections(self):
        """Stacked (C,3,4) array of projection matrices."""
        return np.stack([c.projection for c in self.cameras])


@dataclass(frozen=True)
class CropTransform:
    """Affine map from heatmap grid coordinates to full-image pixels."""

    offset: tuple[float, float] = (0.0, 0.0)
    scale: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if not (self.scale[0] > 0 and self.scale[1] > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls):
        return cls()


def apply_crop(t: CropTransform, coord):
    """Map heatmap (x, y) to image pixels: offset + scale * coord."""
    xy = np.asarray(coord, dtype=float)
    return xy * np.asarray(t.scale) + np.asarray(t.offset)


def invert_crop(t: CropTransform) -> CropTransform:
    """The inverse transform (image pixels back to heatmap coordinates)."""
    sx, sy = t.scale
    ox, oy = t.offset
    return CropTransform(offset=(-ox / sx, -oy / sy), scale=(1.0 / sx, 1.0 / sy))


def heatmap_projection(camera: Camera, crop: CropTransform):
    """Projection matrix composed with the image->heatmap mapping.

    Folding the inverse crop into P lets voxel unprojection work directly
    in heatmap coordinates.
    """
    inv = invert_crop(crop)
    A = np.array([[inv.scale[0], 0.0, inv.offset[0]],
                  [0.0, inv.scale[1], inv.offset[1]],
                  [0.0, 0.0, 1.0]])
    return A @ camera.projection


def save_cameras(path, rig: Rig):
    """Write cameras.json. Cameras built from K/R/t keep that form."""
    entries = []
    for cam in rig.cameras:
        e = {"name": cam.name, "image_size": list(cam.image_size)}
        if cam.K is not None:
            e["K"] = cam.K.tolist()
            e["R"] = cam.R.tolist()
            e["t"] = cam.t.tolist()
        else:
            e["P"] = cam.projection.tolist()
        entries.append(e)
    with open(path, "w") as f:
        json.dump({"cameras": entries}, f, indent=1, sort_keys=True)
        f.write("\n")


def load_cameras(path) -> Rig:
    with open(path) as f:
        data = json.load(f)
    cams = []
    for e in data["cameras"]:
        size = tuple(e["image_size"])
        if "P" in e:
            cams.append(Camera(name=e["name"], projection=np.array(e["P"]),
                               image_size=size))
        else:
            cams.append(Camera.from_krt(e["name"], np.array(e["K"]),
                                        np.array(e["R"]), np.array(e["t"]), size))
    return Rig(tuple(cams))
