"""Command-line interface.

Subcommands: simulate, triangulate, volumetric, fit, evaluate, sweep,
gradcheck. Every command that involves randomness requires an explicit
--seed; given identical flags and seed, data outputs are byte-identical
across runs. Each command writes a manifest next to its outputs. Exit
codes: 0 success, 1 the command ran but every joint/frame failed (or a
check failed), 2 bad flags, 3 unreadable or malformed files.

Data files store meters; everything printed for humans is millimeters.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import formats, gradcheck
from .errors import BadFileFormat, TriviewError
from .evaluation import Pose3D, camera_subset_sweep, mpjpe
from .geometry import CropTransform, load_cameras, save_cameras
from .heatmap import localize_2d
from .learn import FitConfig, fit_weights, evaluate_weighted_vs_unweighted
from .pipeline import DEFAULT_SHARPNESS, algebraic_poses, ransac_poses, \
    volumetric_pose
from .robust import RansacConfig, ransac_triangulate
from .synth import (DEFAULT_SIGMA_HM, Frame, SceneConfig, generate_frames,
                    make_ring_rig, render_frame_heatmaps,
                    render_heatmap_stack)
from .triangulation import Observation, triangulate
from .volumetric import VoxelGridSpec

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _int_list(text: str):
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def _float_list(text: str):
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def _manifest_path(out_file: str) -> str:
    base = os.path.basename(out_file)
    stem = base[:-5] if base.endswith(".json") else base
    return os.path.join(os.path.dirname(out_file) or ".", f"{stem}.manifest.json")


def _snapshot(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _build_frames(uv, gt):
    """Assemble synthetic-style frames from loaded keypoints and poses."""
    visible = np.isfinite(uv).all(-1)
    return [Frame(joints=gt[f], observations=uv[f], visible=visible[f],
                  corrupted=np.zeros_like(visible[f]))
            for f in range(uv.shape[0])]


def _load_rig_and_keypoints(cameras_path, keypoints_path):
    rig = load_cameras(cameras_path)
    names = [c.name for c in rig.cameras]
    _, uv = formats.load_keypoints(keypoints_path, camera_names=names)
    return rig, names, uv


def _run_frames(worker, n_frames: int, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, range(n_frames)))
    return [worker(f) for f in range(n_frames)]


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        cfg = SceneConfig(
            num_cameras=args.cameras, num_frames=args.frames,
            num_joints=args.joints, pixel_noise_sigma=args.noise,
            outlier_rate=args.outlier_rate, outlier_shift=args.outlier_shift,
            occlusion_rate=args.occlusion_rate, seed=args.seed,
            corrupt_cameras=(tuple(_int_list(args.corrupt_cameras))
                             if args.corrupt_cameras else None))
        rig = make_ring_rig(args.cameras, radius=args.radius,
                            height=args.height)
    except ValueError as e:
        _err(str(e))
        return EXIT_USAGE
    os.makedirs(args.out, exist_ok=True)
    frames = generate_frames(rig, cfg)

    cam_path = os.path.join(args.out, "cameras.json")
    kp_path = os.path.join(args.out, "keypoints.json")
    gt_path = os.path.join(args.out, "gt_poses.json")
    save_cameras(cam_path, rig)
    obs = np.stack([f.observations for f in frames]) if frames else \
        np.zeros((0, args.cameras, args.joints, 2))
    formats.save_keypoints(kp_path, obs, [c.name for c in rig.cameras])
    formats.save_poses(gt_path, np.stack([f.joints for f in frames])
                       if frames else np.zeros((0, args.joints, 3)))
    outputs = [cam_path, kp_path, gt_path]

    if args.heatmaps:
        hm_dir = os.path.join(args.out, "heatmaps")
        os.makedirs(hm_dir, exist_ok=True)
        meta = None
        for f, frame in enumerate(frames):
            maps, crop = render_frame_heatmaps(frame, rig,
                                               sigma_hm=args.sigma_hm)
            for c, cam in enumerate(rig.cameras):
                path = os.path.join(hm_dir, f"frame{f:05d}_{cam.name}.hmap")
                formats.write_hmap(path, maps[c].transpose(2, 0, 1))
                outputs.append(path)
            if meta is None:
                meta = {"cameras": [c.name for c in rig.cameras],
                        "frames": len(frames), "sigma": args.sigma_hm,
                        "crop_offset": list(crop.offset),
                        "crop_scale": list(crop.scale),
                        "height": maps.shape[1], "width": maps.shape[2],
                        "joints": maps.shape[3]}
        if meta is not None:
            meta_path = os.path.join(hm_dir, "meta.json")
            with open(meta_path, "w") as fh:
                json.dump(meta, fh, indent=1, sort_keys=True)
                fh.write("\n")
            outputs.append(meta_path)

    formats.write_manifest(os.path.join(args.out, "manifest.json"),
                           "simulate", _snapshot(args), seed=args.seed,
                           outputs=outputs)
    print(f"wrote {len(frames)} frames for {args.cameras} cameras "
          f"to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# triangulate
# --------------------------------------------------------------------------

def _joint_weight(weights, c, j) -> float:
    if weights is None:
        return 1.0
    return float(weights[c] if weights.ndim == 1 else weights[c, j])


def _triangulate_joint(rig, names, uv_cj, weights, j, method, cfg):
    obs = [Observation(c, tuple(uv_cj[c]),
                       _joint_weight(weights, c, j))
           for c in range(uv_cj.shape[0]) if np.isfinite(uv_cj[c]).all()]
    diag = {"views": len(obs)}
    try:
        if method == "ransac":
            res, mask = ransac_triangulate(rig, obs, cfg)
            diag["inliers"] = [names[o.camera_index]
                               for o, keep in zip(obs, mask) if keep]
        else:
            res = triangulate(rig, obs)
    except TriviewError as e:
        diag["reason"] = type(e).__name__
        return None, diag
    finite = res.per_view_residual[np.isfinite(res.per_view_residual)]
    diag["rms_px"] = float(np.sqrt(np.mean(finite ** 2))) if finite.size else None
    diag["gap"] = res.singular_gap
    return res.point3d, diag


def cmd_triangulate(args) -> int:
    if args.method == "ransac" and args.seed is None:
        _err("--seed is required with --method ransac")
        return EXIT_USAGE
    if args.method == "dlt" and args.weights:
        _err("--weights only applies to --method weighted")
        return EXIT_USAGE
    rig, names, uv = _load_rig_and_keypoints(args.cameras, args.keypoints)
    weights = formats.load_weights(args.weights) if args.weights else None
    if weights is not None and weights.shape[0] != len(rig):
        raise BadFileFormat(f"{args.weights}: {weights.shape[0]} weights "
                            f"for {len(rig)} cameras")
    cfg = None
    if args.method == "ransac":
        cfg = RansacConfig(iterations=args.iterations,
                           huber_delta=args.huber_delta,
                           inlier_threshold=args.inlier_threshold,
                           seed=args.seed)

    F, C, J, _ = uv.shape
    points = np.full((F, J, 3), np.nan)
    diagnostics = [None] * F

    def work(f):
        per_joint = []
        for j in range(J):
            p, diag = _triangulate_joint(rig, names, uv[f, :, j], weights,
                                         j, args.method, cfg)
            if p is not None:
                points[f, j] = p
            per_joint.append(diag)
        diagnostics[f] = {"per_joint": per_joint}

    _run_frames(work, F, args.threads)
    formats.save_poses(args.out, points, diagnostics)
    formats.write_manifest(_manifest_path(args.out), "triangulate",
                           _snapshot(args), seed=args.seed,
                           inputs=[args.cameras, args.keypoints] +
                                  ([args.weights] if args.weights else []),
                           outputs=[args.out])
    n_ok = int(np.isfinite(points).all(-1).sum())
    print(f"triangulated {n_ok}/{F * J} joints ({args.method}) -> {args.out}")
    return EXIT_OK if n_ok > 0 else EXIT_FAILED


# --------------------------------------------------------------------------
# volumetric
# --------------------------------------------------------------------------

def _heatmap_meta(hm_dir):
    with open(os.path.join(hm_dir, "meta.json")) as f:
        meta = json.load(f)
    for key in ("cameras", "frames", "crop_scale", "crop_offset",
                "height", "width", "joints"):
        if key not in meta:
            raise BadFileFormat(f"{hm_dir}/meta.json: missing {key!r}")
    return meta


def _load_heatmap_frame(hm_dir, meta, f):
    """One frame's (C, H, W, J) stack from per-camera HMAP files."""
    stacks = []
    for name in meta["cameras"]:
        path = os.path.join(hm_dir, f"frame{f:05d}_{name}.hmap")
        arr = formats.read_hmap(path)
        if arr.ndim != 3:
            raise BadFileFormat(f"{path}: expected a rank-3 stack")
        stacks.append(arr.transpose(1, 2, 0))       # (J,H,W) -> (H,W,J)
    return np.stack(stacks)


def _peaks_from_maps(maps, crop):
    """Per-channel soft-argmax in image pixels; (C, J, 2), NaN when empty."""
    C, H, W, J = maps.shape
    uv = np.full((C, J, 2), np.nan)
    for c in range(C):
        for j in range(J):
            if maps[c, :, :, j].max() <= 0:
                continue
            xy, _ = localize_2d(maps[c, :, :, j].astype(float))
            uv[c, j] = (xy[0] * crop.scale[0] + crop.offset[0],
                        xy[1] * crop.scale[1] + crop.offset[1])
    return uv


def cmd_volumetric(args) -> int:
    if (args.keypoints is None) == (args.heatmaps is None):
        _err("exactly one of --keypoints / --heatmaps is required")
        return EXIT_USAGE
    if args.yaw == "random" and args.seed is None:
        _err("--seed is required with --yaw random")
        return EXIT_USAGE
    if args.L <= 0 or args.N < 2:
        _err("--L must be positive and --N at least 2")
        return EXIT_USAGE
    rig = load_cameras(args.cameras)
    names = [c.name for c in rig.cameras]
    conf = None
    if args.aggregation == "conf":
        conf = (np.ones(len(rig)) if not args.conf
                else np.asarray(_float_list(args.conf), dtype=float))
        if conf.shape != (len(rig),):
            _err(f"--conf needs {len(rig)} comma-separated values")
            return EXIT_USAGE

    hm_meta = None
    if args.keypoints is not None:
        _, uv = formats.load_keypoints(args.keypoints, camera_names=names)
        F, C, J, _ = uv.shape
        crops = [CropTransform(offset=(0.0, 0.0),
                               scale=(cam.image_size[0] / args.heatmap_size,
                                      cam.image_size[1] / args.heatmap_size))
                 for cam in rig.cameras]

        def get_maps(f):
            return np.concatenate(
                [render_heatmap_stack(uv[f, c][None], crops[c],
                                      args.heatmap_size, args.heatmap_size,
                                      args.sigma_hm) for c in range(C)])
    else:
        hm_meta = _heatmap_meta(args.heatmaps)
        F = int(hm_meta["frames"])
        C, J = len(hm_meta["cameras"]), int(hm_meta["joints"])
        if hm_meta["cameras"] != names:
            raise BadFileFormat("heatmap meta cameras do not match "
                                "cameras.json")
        crop0 = CropTransform(offset=tuple(hm_meta["crop_offset"]),
                              scale=tuple(hm_meta["crop_scale"]))
        crops = [crop0] * C
        get_maps = lambda f: _load_heatmap_frame(args.heatmaps, hm_meta, f)
        uv = None

    # Anchors: per-frame pelvis, either triangulated or from a pose file.
    if args.anchor == "algebraic":
        if uv is None:
            peak_uv = np.stack([_peaks_from_maps(get_maps(f), crops[0])
                                for f in range(F)])
            pel = peak_uv[:, :, args.pelvis_index:args.pelvis_index + 1]
        else:
            pel = uv[:, :, args.pelvis_index:args.pelvis_index + 1]
        apts, avalid, _ = algebraic_poses(rig, pel)
        anchors = apts[:, 0]
        anchor_ok = avalid[:, 0]
    else:
        apts, _ = formats.load_poses(args.anchor)
        if apts.shape[0] != F:
            raise BadFileFormat(f"{args.anchor}: {apts.shape[0]} frames, "
                                f"dataset has {F}")
        anchors = apts[:, args.pelvis_index]
        anchor_ok = np.isfinite(anchors).all(-1)

    yaws = np.zeros(F)
    if args.yaw == "random":
        yaws = np.random.default_rng(args.seed).uniform(0, 2 * np.pi, F)

    points = np.full((F, J, 3), np.nan)
    diagnostics = [None] * F

    def work(f):
        if not anchor_ok[f]:
            diagnostics[f] = {"reason": "AnchorUnavailable"}
            return
        maps = get_maps(f)
        spec = VoxelGridSpec(anchor=tuple(anchors[f]), side_length=args.L,
                             resolution=args.N, yaw=float(yaws[f]))
        res = volumetric_pose(rig, maps, spec, crops, args.aggregation,
                              conf, args.sharpness,
                              fast=not args.reference)
        views = (maps.reshape(C, -1, J).max(axis=1) > 0).sum(axis=0)
        pts = res.positions.copy()
        pts[views == 0] = np.nan
        points[f] = pts
        diagnostics[f] = {
            "grid": {"anchor": [float(a) for a in anchors[f]],
                     "side_length": args.L, "resolution": args.N,
                     "yaw": float(yaws[f])},
            "views_per_joint": [int(v) for v in views],
            "behind_voxels": [int(b) for b in res.behind_counts],
        }
        if (views == 0).any():
            diagnostics[f]["empty_joints"] = \
                [int(j) for j in np.flatnonzero(views == 0)]

    _run_frames(work, F, args.threads)
    formats.save_poses(args.out, points, diagnostics)
    formats.write_manifest(_manifest_path(args.out), "volumetric",
                           _snapshot(args), seed=args.seed,
                           inputs=[args.cameras,
                                   args.keypoints or args.heatmaps],
                           outputs=[args.out])
    n_ok = int(np.isfinite(points).all(-1).sum())
    print(f"localized {n_ok}/{F * J} joints ({args.aggregation}, N={args.N}) "
          f"-> {args.out}")
    return EXIT_OK if n_ok > 0 else EXIT_FAILED


# --------------------------------------------------------------------------
# fit / evaluate / sweep / gradcheck
# --------------------------------------------------------------------------

def cmd_fit(args) -> int:
    try:
        cfg = FitConfig(learning_rate=args.lr, steps=args.steps,
                        seed=args.seed, per_joint=args.per_joint,
                        epsilon=args.epsilon)
    except ValueError as e:
        _err(str(e))
        return EXIT_USAGE
    rig, names, uv = _load_rig_and_keypoints(args.cameras, args.keypoints)
    gt, _ = formats.load_poses(args.gt)
    if gt.shape[0] != uv.shape[0] or gt.shape[1] != uv.shape[2]:
        raise BadFileFormat("keypoints and gt_poses disagree on frame or "
                            "joint counts")
    frames = _build_frames(uv, gt)
    try:
        weights, trace = fit_weights(frames, rig, cfg)
    except TriviewError as e:
        _err(f"fit failed: {e}")
        return EXIT_FAILED
    weights.to_json(args.out)
    report = evaluate_weighted_vs_unweighted(frames, rig, weights)
    report["loss_initial"] = float(trace[0])
    report["loss_final"] = float(trace[-1])
    outputs = [args.out]
    if args.report:
        with open(args.report, "w") as f:
            json.dump(report, f, indent=1, sort_keys=True)
            f.write("\n")
        outputs.append(args.report)
    formats.write_manifest(_manifest_path(args.out), "fit", _snapshot(args),
                           seed=args.seed,
                           inputs=[args.cameras, args.keypoints, args.gt],
                           outputs=outputs)
    print(f"loss {report['loss_initial']:.6f} -> {report['loss_final']:.6f} "
          f"after {args.steps} steps")
    print(f"MPJPE uniform {report['mpjpe_uniform_mm']:.2f} mm, "
          f"fitted {report['mpjpe_fitted_mm']:.2f} mm "
          f"(ratio {report['ratio']:.3f})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred, _ = formats.load_poses(args.pred)
    gt, _ = formats.load_poses(args.gt)
    if pred.shape != gt.shape:
        raise BadFileFormat(f"prediction {pred.shape} and ground truth "
                            f"{gt.shape} shapes differ")
    if not 0 <= args.pelvis_index < gt.shape[1]:
        _err(f"--pelvis-index must lie in [0, {gt.shape[1]})")
        return EXIT_USAGE
    relative = args.relative == "pelvis"
    per_frame = []
    skipped = 0
    for f in range(pred.shape[0]):
        try:
            p = Pose3D(joints=np.nan_to_num(pred[f]),
                       valid=np.isfinite(pred[f]).all(-1),
                       pelvis_index=args.pelvis_index)
            g = Pose3D(joints=np.nan_to_num(gt[f]),
                       valid=np.isfinite(gt[f]).all(-1),
                       pelvis_index=args.pelvis_index)
            per_frame.append(mpjpe(p, g, relative=relative))
        except TriviewError:
            skipped += 1
    if not per_frame:
        _err("no frame had jointly valid joints")
        return EXIT_FAILED
    mean = float(np.mean(per_frame))
    label = "pelvis-relative" if relative else "absolute"
    print(f"MPJPE ({label}): {mean:.3f} mm over {len(per_frame)} frames"
          + (f" ({skipped} skipped)" if skipped else ""))
    outputs = []
    if args.report:
        with open(args.report, "w") as f:
            json.dump({"mpjpe_mm": mean, "relative": args.relative,
                       "frames_evaluated": len(per_frame),
                       "frames_skipped": skipped,
                       "per_frame_mm": per_frame}, f, indent=1,
                      sort_keys=True)
            f.write("\n")
        outputs.append(args.report)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("frame,mpjpe_mm\n")
            for i, v in enumerate(per_frame):
                f.write(f"{i},{v:.6f}\n")
        outputs.append(args.csv)
    if outputs:
        formats.write_manifest(_manifest_path(outputs[0]), "evaluate",
                               _snapshot(args),
                               inputs=[args.pred, args.gt], outputs=outputs)
    return EXIT_OK


def _sweep_method(args, name):
    if name == "dlt":
        def run(sub_rig, sub_frames):
            uv = np.stack([fr.observations for fr in sub_frames])
            return algebraic_poses(sub_rig, uv)[0]
        return run
    if name == "ransac":
        cfg = RansacConfig(iterations=args.iterations,
                           huber_delta=args.huber_delta,
                           inlier_threshold=args.inlier_threshold,
                           seed=args.seed)
        return lambda sub_rig, sub_frames: ransac_poses(
            sub_rig, np.stack([fr.observations for fr in sub_frames]), cfg)

    def run(sub_rig, sub_frames):
        from .pipeline import volumetric_poses
        uv = np.stack([fr.observations for fr in sub_frames])
        pel = uv[:, :, args.pelvis_index:args.pelvis_index + 1]
        apts, avalid, _ = algebraic_poses(sub_rig, pel)
        anchors = apts[:, 0]
        ok = avalid[:, 0]
        if not ok.any():
            raise TriviewError("no frame has a usable anchor")
        anchors[~ok] = anchors[ok].mean(axis=0)
        pts, _ = volumetric_poses(sub_rig, uv, anchors,
                                  side_length=args.L, resolution=args.N,
                                  sigma_hm=args.sigma_hm,
                                  heatmap_size=args.heatmap_size,
                                  sharpness=args.sharpness)
        return pts
    return run


def cmd_sweep(args) -> int:
    sizes = _int_list(args.sizes)
    rig, names, uv = _load_rig_and_keypoints(args.cameras, args.keypoints)
    if any(not 2 <= s <= len(rig) for s in sizes):
        _err(f"--sizes entries must lie in [2, {len(rig)}]")
        return EXIT_USAGE
    gt, _ = formats.load_poses(args.gt)
    if gt.shape[0] != uv.shape[0] or gt.shape[1] != uv.shape[2]:
        raise BadFileFormat("keypoints and gt_poses disagree on frame or "
                            "joint counts")
    frames = _build_frames(uv, gt)
    curve = camera_subset_sweep(rig, frames, _sweep_method(args, args.method),
                                sizes, trials=args.trials, seed=args.seed)
    for size, val in zip(curve["sizes"], curve["mpjpe_mm"]):
        print(f"cameras={size}: MPJPE {val:.2f} mm")
    if curve["errors"]:
        print(f"{curve['errors']} subset evaluations failed")
    outputs = [args.report]
    with open(args.report, "w") as f:
        json.dump(curve, f, indent=1, sort_keys=True)
        f.write("\n")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("cameras,mpjpe_mm\n")
            for size, val in zip(curve["sizes"], curve["mpjpe_mm"]):
                f.write(f"{size},{val:.6f}\n")
        outputs.append(args.csv)
    formats.write_manifest(_manifest_path(args.report), "sweep",
                           _snapshot(args), seed=args.seed,
                           inputs=[args.cameras, args.keypoints, args.gt],
                           outputs=outputs)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.trials < 1 or args.step <= 0 or args.tol <= 0:
        _err("--trials must be >= 1; --step and --tol must be positive")
        return EXIT_USAGE
    report = gradcheck.run_suite(trials=args.trials, seed=args.seed,
                                 step=args.step)
    for name, worst in sorted(report["per_check"].items()):
        print(f"{name}: max relative error {worst:.3e}")
    ok = report["worst"] <= args.tol
    print(f"worst: {report['worst_check']} at {report['worst']:.3e} "
          f"({'OK' if ok else 'FAIL'}, tolerance {args.tol:g})")
    if args.report:
        with open(args.report, "w") as f:
            json.dump({**report, "tolerance": args.tol, "passed": bool(ok)},
                      f, indent=1, sort_keys=True)
            f.write("\n")
        formats.write_manifest(_manifest_path(args.report), "gradcheck",
                               _snapshot(args), seed=args.seed,
                               outputs=[args.report])
    return EXIT_OK if ok else EXIT_FAILED


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="triview",
        description="Multi-view triangulation toolkit: synthetic scenes, "
                    "algebraic/robust/volumetric 3D pose estimation, "
                    "confidence-weight fitting, and evaluation.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    s.add_argument("--cameras", type=int, required=True)
    s.add_argument("--frames", type=int, required=True)
    s.add_argument("--joints", type=int, default=17)
    s.add_argument("--noise", type=float, default=0.0,
                   help="pixel noise sigma")
    s.add_argument("--outlier-rate", type=float, default=0.0)
    s.add_argument("--outlier-shift", type=float, default=0.0,
                   help="outlier displacement in pixels")
    s.add_argument("--occlusion-rate", type=float, default=0.0)
    s.add_argument("--corrupt-cameras", default="",
                   help="comma list restricting outliers to these cameras")
    s.add_argument("--radius", type=float, default=4.0)
    s.add_argument("--height", type=float, default=1.7)
    s.add_argument("--heatmaps", action="store_true",
                   help="also write HMAP heatmap stacks")
    s.add_argument("--sigma-hm", type=float, default=DEFAULT_SIGMA_HM)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("triangulate", help="per-joint DLT / RANSAC poses")
    t.add_argument("--cameras", required=True)
    t.add_argument("--keypoints", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--method", choices=("dlt", "weighted", "ransac"),
                   default="dlt")
    t.add_argument("--weights", help="confidence weights JSON (weighted)")
    t.add_argument("--seed", type=int, help="required for ransac")
    t.add_argument("--iterations", type=int, default=100)
    t.add_argument("--huber-delta", type=float, default=5.0)
    t.add_argument("--inlier-threshold", type=float, default=10.0)
    t.add_argument("--threads", type=int, default=1)
    t.set_defaults(func=cmd_triangulate)

    v = sub.add_parser("volumetric", help="voxel-grid pose estimation")
    v.add_argument("--cameras", required=True)
    v.add_argument("--keypoints", help="keypoints.json (maps rendered "
                                       "internally)")
    v.add_argument("--heatmaps", help="directory of HMAP stacks + meta.json")
    v.add_argument("--out", required=True)
    v.add_argument("--aggregation", choices=("sum", "conf", "softmax"),
                   default="softmax")
    v.add_argument("--anchor", default="algebraic",
                   help='"algebraic" or a poses.json supplying pelvises')
    v.add_argument("--yaw", choices=("0", "random"), default="0")
    v.add_argument("--L", type=float, default=2.5,
                   help="cube side length in meters")
    v.add_argument("--N", type=int, default=64, help="voxels per side")
    v.add_argument("--sigma-hm", type=float, default=2.5)
    v.add_argument("--sharpness", type=float, default=DEFAULT_SHARPNESS)
    v.add_argument("--conf", default="",
                   help="comma list of per-camera multipliers (conf mode)")
    v.add_argument("--pelvis-index", type=int, default=0)
    v.add_argument("--heatmap-size", type=int, default=96)
    v.add_argument("--seed", type=int, help="required for --yaw random")
    v.add_argument("--reference", action="store_true",
                   help="use the composed-operation path instead of the "
                        "fused kernel")
    v.add_argument("--threads", type=int, default=1)
    v.set_defaults(func=cmd_volumetric)

    f = sub.add_parser("fit", help="fit per-camera confidence weights")
    f.add_argument("--cameras", required=True)
    f.add_argument("--keypoints", required=True)
    f.add_argument("--gt", required=True)
    f.add_argument("--out", required=True, help="weights JSON")
    f.add_argument("--lr", type=float, default=0.01)
    f.add_argument("--steps", type=int, default=500)
    f.add_argument("--per-joint", action="store_true")
    f.add_argument("--epsilon", type=float, default=0.04)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--report", help="optional JSON report path")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("evaluate", help="MPJPE between two pose files")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--relative", choices=("none", "pelvis"), default="none")
    e.add_argument("--pelvis-index", type=int, default=0)
    e.add_argument("--report", help="optional JSON report path")
    e.add_argument("--csv", help="optional per-frame CSV path")
    e.set_defaults(func=cmd_evaluate)

    w = sub.add_parser("sweep", help="MPJPE vs camera-subset size")
    w.add_argument("--cameras", required=True)
    w.add_argument("--keypoints", required=True)
    w.add_argument("--gt", required=True)
    w.add_argument("--sizes", default="2,4,8")
    w.add_argument("--trials", type=int, default=50)
    w.add_argument("--method", choices=("dlt", "ransac", "volumetric"),
                   default="volumetric")
    w.add_argument("--L", type=float, default=2.5)
    w.add_argument("--N", type=int, default=64)
    w.add_argument("--sigma-hm", type=float, default=2.5)
    w.add_argument("--sharpness", type=float, default=DEFAULT_SHARPNESS)
    w.add_argument("--heatmap-size", type=int, default=96)
    w.add_argument("--pelvis-index", type=int, default=0)
    w.add_argument("--iterations", type=int, default=100)
    w.add_argument("--huber-delta", type=float, default=5.0)
    w.add_argument("--inlier-threshold", type=float, default=10.0)
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--report", required=True)
    w.add_argument("--csv")
    w.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    g.add_argument("--trials", type=int, default=100)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--step", type=float, default=1e-5)
    g.add_argument("--tol", type=float, default=1e-4)
    g.add_argument("--report", help="optional JSON report path")
    g.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        _err("--threads must be at least 1")
        return EXIT_USAGE
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError, BadFileFormat) as e:
        _err(str(e))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
