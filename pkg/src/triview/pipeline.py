"""End-to-end pose estimation paths shared by the CLI, benchmarks, and tests.

Three methods produce (J, 3) joint arrays from per-frame data:

* algebraic DLT (optionally confidence-weighted), batched over frames;
* RANSAC per joint (robust baseline);
* volumetric: render/ingest per-camera heatmaps, unproject into a voxel
  cube anchored at the (estimated) pelvis, aggregate across cameras,
  sharpen, and take the 3D center of mass.

The volumetric path has two implementations: a reference composition of
the public volumetric ops, and a fused kernel (:mod:`triview._kernels`)
that computes the same aggregation orders of magnitude faster. Both are
kept because the composition is the correctness oracle for the kernel.

Sharpening: aggregated volumes of Gaussian blobs have a small dynamic
range, and a unit-temperature softmax over 64^3 voxels would wash the
peak out entirely. The pipeline therefore rescales the aggregated volume
so its range maps to ``sharpness`` before the softmax; the center of mass
then resolves the peak with subvoxel precision while staying
differentiable. ``sharpness`` trades peak locality against grid aliasing;
the default of 20 sits well inside the regime where quantization error
stays below a quarter voxel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BadConfidence
from .geometry import CropTransform, Rig, heatmap_projection
from .robust import RansacConfig, ransac_triangulate
from .triangulation import (Observation, design_rows_batch, triangulate_batch)
from .volumetric import (VoxelGridSpec, aggregate, refine_volume,
                         soft_argmax_3d, unproject_view, volumetric_softmax,
                         voxel_world_coords, yaw_matrix)

DEFAULT_SHARPNESS = 20.0
_GAP_RTOL = 1e-10


@dataclass(frozen=True)
class VolumetricPoseResult:
    positions: np.ndarray        # (J, 3) world meters
    spec: VoxelGridSpec
    behind_counts: np.ndarray    # (C,) behind-camera voxels per view
    alpha: float                 # effective softmax temperature used


def algebraic_poses(rig: Rig, observations, weights=None):
    """Batched DLT over frames: observations (F, C, J, 2) -> (F, J, 3).

    NaN observation rows mark invisible joints. ``weights`` is (C,) or
    (C, J) effective per-camera(-per-joint) confidences, or None for the
    unweighted baseline. Returns ``(points, valid, gap)``: joints seen by
    fewer than two cameras or with a collapsed singular gap are flagged
    invalid (their points are NaN).
    """
    uv = np.asarray(observations, dtype=float)
    F, C, J, _ = uv.shape
    rows = design_rows_batch(rig.projections, np.swapaxes(uv, 1, 2))  # (F,J,2C,4)
    w = None
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        w = np.broadcast_to(w.T if w.ndim == 2 else w, (J, C))[None]
    points, (_, S, _, _) = triangulate_batch(rows, w)
    gap = S[..., 2] - S[..., 3]
    n_views = np.isfinite(uv).all(-1).sum(1)                          # (F, J)
    valid = (n_views >= 2) & (gap >= _GAP_RTOL * S[..., 0])
    points = np.where(valid[..., None], points, np.nan)
    return points, valid, gap


def ransac_poses(rig: Rig, observations, cfg: RansacConfig):
    """Per-joint RANSAC over frames: observations (F, C, J, 2) -> (F, J, 3)."""
    uv = np.asarray(observations, dtype=float)
    F, C, J, _ = uv.shape
    out = np.full((F, J, 3), np.nan)
    for f in range(F):
        for j in range(J):
            obs = [Observation(c, tuple(uv[f, c, j]))
                   for c in range(C) if np.isfinite(uv[f, c, j]).all()]
            if len(obs) < 2:
                continue
            try:
                res, _ = ransac_triangulate(rig, obs, cfg)
            except Exception:
                continue
            out[f, j] = res.point3d
    return out


def volumetric_pose(rig: Rig, maps, spec: VoxelGridSpec,
                    crop: CropTransform | list[CropTransform] = CropTransform(),
                    aggregation: str = "softmax", conf=None,
                    sharpness: float = DEFAULT_SHARPNESS,
                    fast: bool = True) -> VolumetricPoseResult:
    """Volumetric localization of all J joints for one frame.

    ``maps`` is (C, H, W, J): one J-channel heatmap stack per camera, in
    heatmap coordinates related to full-image pixels by ``crop`` (one
    shared transform or one per camera).
    """
    maps = np.asarray(maps)
    C = maps.shape[0]
    crops = list(crop) if isinstance(crop, (list, tuple)) else [crop] * C
    if aggregation == "conf":
        d = np.asarray(conf if conf is not None else (), dtype=float)
        if d.shape != (C,) or (d < 0).any() or d.sum() <= 0:
            raise BadConfidence(f"conf mode needs {C} nonnegative multipliers")
    if fast and maps.shape[3] <= _kernels.MAX_CHANNELS:
        return _volumetric_pose_fast(rig, maps, spec, crops, aggregation,
                                     conf, sharpness)
    return _volumetric_pose_reference(rig, maps, spec, crops, aggregation,
                                      conf, sharpness)


def _volumetric_pose_reference(rig, maps, spec, crops, aggregation, conf,
                               sharpness):
    vols = []
    behind = np.empty(len(rig), np.int64)
    for c in range(len(rig)):
        vol, nb = unproject_view(rig[c], crops[c], maps[c], spec)
        vols.append(vol)
        behind[c] = nb
    agg = refine_volume(aggregate(vols, aggregation, conf))
    alpha = _effective_alpha(agg, sharpness)
    p = volumetric_softmax(agg, alpha)
    pos = soft_argmax_3d(p, spec)
    return VolumetricPoseResult(positions=pos, spec=spec,
                                behind_counts=behind, alpha=alpha)


def _volumetric_pose_fast(rig, maps, spec, crops, aggregation, conf,
                          sharpness):
    C, H, W, J = maps.shape
    m32 = np.ascontiguousarray(maps, dtype=np.float32)
    bits = _kernels.pack_channel_bits(m32)
    Phm = np.ascontiguousarray(
        [heatmap_projection(rig[c], crops[c]) for c in range(C)], dtype=np.float64)
    N = spec.resolution
    out = np.zeros((N ** 3, J), np.float32)
    behind = np.zeros(C, np.int64)
    d = np.ones(C) if conf is None else np.asarray(conf, dtype=float)
    _kernels.fused_unproject_aggregate(
        Phm, m32, bits, np.asarray(spec.anchor, dtype=np.float64),
        yaw_matrix(spec.yaw), spec.pitch, N, spec.side_length,
        _kernels.AGG_MODES[aggregation], d, out, behind)
    agg = refine_volume(out)
    alpha = _effective_alpha(agg, sharpness)
    # float32 softmax + center of mass in the local grid frame
    p = np.exp((agg - agg.max(axis=0)) * np.float32(alpha))
    mass = p.sum(axis=0, dtype=np.float64)
    ax = ((np.arange(N) + 0.5) * spec.pitch - spec.side_length / 2.0)
    gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
    base = np.stack([gx, gy, gz], -1).reshape(-1, 3).astype(np.float32)
    local = (base.T @ p).astype(np.float64) / mass                  # (3, J)
    pos = local.T @ yaw_matrix(spec.yaw).T + np.asarray(spec.anchor)
    return VolumetricPoseResult(positions=pos, spec=spec,
                                behind_counts=behind, alpha=alpha)


def _effective_alpha(agg, sharpness):
    rng = float(agg.max() - agg.min())
    return sharpness / max(rng, 1e-12)


def volumetric_poses(rig: Rig, observations, anchors, side_length: float = 2.5,
                     resolution: int = 64, yaws=None, sigma_hm: float = 2.5,
                     heatmap_size: int = 96, crop_scale: float = 4.0,
                     aggregation: str = "softmax", conf=None,
                     sharpness: float = DEFAULT_SHARPNESS, fast: bool = True):
    """Volumetric pipeline over frames starting from 2D observations.

    Renders per-camera Gaussian heatmaps at ``sigma_hm`` (heatmap pixels)
    from observations (F, C, J, 2), then localizes volumetrically with a
    per-frame grid anchored at ``anchors`` (F, 3). Occluded (NaN)
    observations render as zero channels. Returns (points (F, J, 3),
    results list).
    """
    from .synth import render_heatmap_stack     # local import; synth renders

    uv = np.asarray(observations, dtype=float)
    F, C, J, _ = uv.shape
    crop = CropTransform(offset=(0.0, 0.0), scale=(crop_scale, crop_scale))
    points = np.full((F, J, 3), np.nan)
    results = []
    yaws = np.zeros(F) if yaws is None else np.asarray(yaws, dtype=float)
    for f in range(F):
        maps = render_heatmap_stack(uv[f], crop, heatmap_size, heatmap_size,
                                    sigma_hm)
        spec = VoxelGridSpec(anchor=tuple(np.asarray(anchors[f], dtype=float)),
                             side_length=side_length, resolution=resolution,
                             yaw=float(yaws[f]))
        res = volumetric_pose(rig, maps, spec, crop, aggregation, conf,
                              sharpness, fast)
        points[f] = res.positions
        results.append(res)
    return points, results
