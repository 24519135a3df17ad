"""Synthetic multi-camera scenes with exact ground truth.

Provides ring-shaped camera rigs, an articulated 17-joint template
skeleton, exact projections with controllable pixel noise, planted
outliers (optionally concentrated on chosen cameras), occlusions, and
Gaussian heatmap rendering. Everything is driven by per-frame seeded
generators: frame i of a config is identical no matter how many frames
are generated or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluation import Pose3D
from .geometry import Camera, CropTransform, Rig, project_points
from .heatmap import render_gaussian

IMAGE_SIZE = 384
HEATMAP_SIZE = 96
CROP_SCALE = IMAGE_SIZE / HEATMAP_SIZE     # 4x: heatmap coord -> image pixels
DEFAULT_SIGMA_HM = 6.0

# Pelvis-rooted template skeleton (meters). Order: pelvis, right leg, left
# leg, spine/head, left arm, right arm. Proportions matter only insofar as
# the figure stays well inside the voxel cube and every camera's view.
TEMPLATE_17 = np.array([
    [0.00, 0.00, 0.00],      # 0  pelvis
    [-0.11, -0.04, 0.00],    # 1  right hip
    [-0.12, -0.42, 0.02],    # 2  right knee
    [-0.13, -0.79, 0.04],    # 3  right ankle
    [0.11, -0.04, 0.00],     # 4  left hip
    [0.12, -0.42, 0.02],     # 5  left knee
    [0.13, -0.79, 0.04],     # 6  left ankle
    [0.00, 0.22, -0.02],     # 7  spine
    [0.00, 0.44, -0.03],     # 8  neck
    [0.01, 0.52, 0.05],      # 9  nose
    [0.00, 0.61, 0.01],      # 10 head top
    [0.17, 0.40, -0.02],     # 11 left shoulder
    [0.23, 0.16, 0.02],      # 12 left elbow
    [0.25, -0.06, 0.06],     # 13 left wrist
    [-0.17, 0.40, -0.02],    # 14 right shoulder
    [-0.23, 0.16, 0.02],     # 15 right elbow
    [-0.25, -0.06, 0.06],    # 16 right wrist
])

PELVIS = 0


def joint_template(num_joints: int = 17):
    """The fixed skeleton template, adapted to other joint counts.

    Fewer joints truncate the 17-joint figure; more joints append
    deterministic pseudo-random offsets so any J stays reproducible.
    """
    if num_joints <= 17:
        return TEMPLATE_17[:num_joints].copy()
    extra = np.random.default_rng(171717).uniform(-0.6, 0.6,
                                                  (num_joints - 17, 3))
    return np.vstack([TEMPLATE_17, extra])


@dataclass(frozen=True)
class SceneConfig:
    """Knobs for synthetic dataset generation."""

    num_cameras: int
    num_frames: int
    num_joints: int = 17
    pixel_noise_sigma: float = 0.0
    outlier_rate: float = 0.0
    outlier_shift: float = 0.0
    occlusion_rate: float = 0.0
    seed: int = 0
    corrupt_cameras: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.num_cameras < 1:
            raise ValueError("num_cameras must be >= 1")
        if self.num_frames < 0 or self.num_joints < 1:
            raise ValueError("num_frames/num_joints out of range")
        if self.pixel_noise_sigma < 0:
            raise ValueError("pixel_noise_sigma must be >= 0")
        for name in ("outlier_rate", "occlusion_rate"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {r}")
        if self.corrupt_cameras is not None:
            cc = tuple(int(c) for c in self.corrupt_cameras)
            if any(not 0 <= c < self.num_cameras for c in cc):
                raise ValueError(f"corrupt_cameras out of range: {cc}")
            object.__setattr__(self, "corrupt_cameras", cc)


@dataclass(frozen=True)
class Frame:
    """Ground truth joints plus per-camera observations and flags."""

    joints: np.ndarray          # (J, 3) meters
    observations: np.ndarray    # (C, J, 2) pixels; NaN when invisible
    visible: np.ndarray         # (C, J) bool
    corrupted: np.ndarray       # (C, J) bool

    def gt_pose(self) -> Pose3D:
        return Pose3D(joints=self.joints, pelvis_index=PELVIS)


def look_at_camera(name, position, target, focal, principal, image_size):
    """Camera at ``position`` looking at ``target``, y-down image axes."""
    pos = np.asarray(position, dtype=float)
    fwd = np.asarray(target, dtype=float) - pos
    fwd = fwd / np.linalg.norm(fwd)
    up = np.array([0.0, 1.0, 0.0])
    x = np.cross(fwd, up)
    nx = np.linalg.norm(x)
    if nx < 1e-12:
        raise ValueError("camera looks straight along the vertical axis")
    x /= nx
    y = np.cross(fwd, x)
    R = np.stack([x, y, fwd])
    t = -R @ pos
    K = np.array([[focal, 0.0, principal[0]],
                  [0.0, focal, principal[1]],
                  [0.0, 0.0, 1.0]])
    return Camera.from_krt(name, K, R, t, image_size)


def make_ring_rig(num_cameras: int, radius: float = 4.0, height: float = 1.7,
                  target=(0.0, 1.0, 0.0)) -> Rig:
    """Cameras evenly spaced on a horizontal circle, all aimed at target.

    The focal length is chosen so a 2 m cube at the target spans about 80%
    of the 384 px image; the principal point sits at the image center
    under the pixel-center convention.
    """
    if num_cameras < 1:
        raise ValueError("num_cameras must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    target = np.asarray(target, dtype=float)
    focal = 0.8 * IMAGE_SIZE * radius / 2.0    # 2 m cube -> 0.8 * image
    pp = ((IMAGE_SIZE - 1) / 2.0, (IMAGE_SIZE - 1) / 2.0)
    cams = []
    for c in range(num_cameras):
        ang = 2.0 * np.pi * c / num_cameras
        pos = np.array([target[0] + radius * np.cos(ang), height,
                        target[2] + radius * np.sin(ang)])
        cams.append(look_at_camera(f"cam{c}", pos, target, focal, pp,
                                   (IMAGE_SIZE, IMAGE_SIZE)))
    return Rig(tuple(cams))


def _frame_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def generate_frames(rig: Rig, cfg: SceneConfig) -> list[Frame]:
    """Seeded scenes: posed template skeletons plus noisy projections.

    Each frame rotates the template about the vertical axis, translates
    it near the rig target, jitters joints, projects into every camera,
    then applies Gaussian pixel noise, planted outliers (restricted to
    ``corrupt_cameras`` when set), and occlusions — in that order, from a
    per-frame generator, so frame i is reproducible in isolation.
    """
    C = len(rig)
    template = joint_template(cfg.num_joints)
    frames = []
    for f in range(cfg.num_frames):
        rng = _frame_rng(cfg.seed, f)
        yaw = rng.uniform(0.0, 2.0 * np.pi)
        cy, sy = np.cos(yaw), np.sin(yaw)
        Ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
        pelvis = np.array([0.0, 1.0, 0.0]) + rng.uniform(-0.15, 0.15, 3)
        joints = template @ Ry.T + pelvis
        joints = joints + rng.uniform(-0.03, 0.03, joints.shape)

        obs = np.empty((C, cfg.num_joints, 2))
        for c in range(C):
            uv, _ = project_points(rig[c], joints)
            obs[c] = uv
        if cfg.pixel_noise_sigma > 0:
            obs = obs + rng.normal(0.0, cfg.pixel_noise_sigma, obs.shape)

        corrupted = np.zeros((C, cfg.num_joints), dtype=bool)
        if cfg.outlier_rate > 0 and cfg.outlier_shift != 0:
            eligible = np.zeros(C, dtype=bool)
            if cfg.corrupt_cameras is None:
                eligible[:] = True
            else:
                eligible[list(cfg.corrupt_cameras)] = True
            hit = rng.random((C, cfg.num_joints)) < cfg.outlier_rate
            hit &= eligible[:, None]
            theta = rng.uniform(0.0, 2.0 * np.pi, (C, cfg.num_joints))
            shift = cfg.outlier_shift * np.stack([np.cos(theta),
                                                  np.sin(theta)], axis=-1)
            obs = np.where(hit[..., None], obs + shift, obs)
            corrupted = hit

        visible = np.ones((C, cfg.num_joints), dtype=bool)
        if cfg.occlusion_rate > 0:
            visible = rng.random((C, cfg.num_joints)) >= cfg.occlusion_rate
            obs = np.where(visible[..., None], obs, np.nan)

        frames.append(Frame(joints=joints, observations=obs,
                            visible=visible, corrupted=corrupted))
    return frames


def default_crop() -> CropTransform:
    """Image <- heatmap transform: 96 px heatmap covering the 384 px image."""
    return CropTransform(offset=(0.0, 0.0), scale=(CROP_SCALE, CROP_SCALE))


def render_heatmap_stack(observations, crop: CropTransform, width: int,
                         height: int, sigma: float):
    """(C, J, 2) image-pixel observations -> (C, H, W, J) float32 maps.

    Invisible (NaN) observations render as all-zero channels. Gaussian
    centers are mapped into heatmap coordinates through the inverse crop.
    """
    obs = np.asarray(observations, dtype=float)
    C, J, _ = obs.shape
    sx, sy = crop.scale
    ox, oy = crop.offset
    maps = np.zeros((C, height, width, J), dtype=np.float32)
    for c in range(C):
        for j in range(J):
            u, v = obs[c, j]
            if not (np.isfinite(u) and np.isfinite(v)):
                continue
            center = ((u - ox) / sx, (v - oy) / sy)
            maps[c, :, :, j] = render_gaussian(center, sigma, width, height)
    return maps


def render_frame_heatmaps(frame: Frame, rig: Rig,
                          crop: CropTransform | None = None,
                          sigma_hm: float = DEFAULT_SIGMA_HM):
    """Per-camera Gaussian heatmaps for one frame; returns (maps, crop).

    maps has shape (C, H, W, J) float32 with one channel per joint;
    occluded joints are all-zero channels.
    """
    if sigma_hm <= 0:
        raise ValueError("sigma_hm must be positive")
    crop = crop or default_crop()
    maps = render_heatmap_stack(frame.observations, crop,
                                HEATMAP_SIZE, HEATMAP_SIZE, sigma_hm)
    return maps, crop
