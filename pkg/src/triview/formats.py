"""File formats shared by the CLI: HMAP binary maps, keypoint/pose JSON,
and run manifests.

HMAP layout: magic ``HMAP``, u8 rank (2 or 3), rank x u32 little-endian
dims ordered fastest-varying first, then a float32 little-endian payload
of prod(dims) values. Arrays are written in C order, so dims are simply
the numpy shape reversed; a (H, W) map stores dims (W, H).

All JSON emitters sort keys and end with a newline so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import datetime
import json
import struct

import numpy as np

from .errors import BadFileFormat

HMAP_MAGIC = b"HMAP"


def write_hmap(path, array):
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim not in (2, 3):
        raise ValueError(f"HMAP stores rank 2 or 3 arrays, got rank {arr.ndim}")
    with open(path, "wb") as f:
        f.write(HMAP_MAGIC)
        f.write(struct.pack("<B", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape[::-1]))
        f.write(arr.tobytes(order="C"))


def read_hmap(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != HMAP_MAGIC:
        raise BadFileFormat(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 5:
        raise BadFileFormat(f"{path}: truncated header")
    rank = blob[4]
    if rank not in (2, 3):
        raise BadFileFormat(f"{path}: rank must be 2 or 3, got {rank}")
    header_end = 5 + 4 * rank
    if len(blob) < header_end:
        raise BadFileFormat(f"{path}: truncated dims")
    dims = struct.unpack(f"<{rank}I", blob[5:header_end])
    count = int(np.prod(dims, dtype=np.int64))
    payload = blob[header_end:]
    if len(payload) != 4 * count:
        raise BadFileFormat(f"{path}: payload holds {len(payload) // 4} "
                            f"floats, dims {dims} need {count}")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    return data.reshape(dims[::-1])


def _dump(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def _point_or_null(p):
    p = np.asarray(p, dtype=float)
    return p.tolist() if np.all(np.isfinite(p)) else None


def save_keypoints(path, observations, camera_names):
    """(F, C, J, 2) pixel observations -> keypoints.json (NaN -> null)."""
    obs = np.asarray(observations, dtype=float)
    F, C, J, _ = obs.shape
    if len(camera_names) != C:
        raise ValueError("camera_names length does not match observations")
    frames = []
    for f in range(F):
        cams = {name: {"joints": [_point_or_null(obs[f, c, j])
                                  for j in range(J)]}
                for c, name in enumerate(camera_names)}
        frames.append({"cameras": cams})
    _dump(path, {"frames": frames})


def load_keypoints(path, camera_names=None):
    """keypoints.json -> (names, (F, C, J, 2) array with NaN for null)."""
    with open(path) as f:
        data = json.load(f)
    frames = data.get("frames")
    if not isinstance(frames, list) or not frames:
        raise BadFileFormat(f"{path}: no frames")
    first = frames[0].get("cameras", {})
    names = list(camera_names) if camera_names is not None else sorted(first)
    num_joints = None
    out = None
    for f, entry in enumerate(frames):
        cams = entry.get("cameras", {})
        for c, name in enumerate(names):
            if name not in cams:
                raise BadFileFormat(f"{path}: frame {f} missing camera "
                                    f"{name!r}")
            joints = cams[name].get("joints")
            if joints is None:
                raise BadFileFormat(f"{path}: frame {f} camera {name!r} "
                                    "has no joints")
            if num_joints is None:
                num_joints = len(joints)
                out = np.full((len(frames), len(names), num_joints, 2), np.nan)
            elif len(joints) != num_joints:
                raise BadFileFormat(f"{path}: inconsistent joint count in "
                                    f"frame {f}")
            for j, uv in enumerate(joints):
                if uv is not None:
                    out[f, c, j] = uv
    return names, out


def save_poses(path, points, diagnostics=None):
    """(F, J, 3) meters -> poses.json; non-finite joints become null."""
    pts = np.asarray(points, dtype=float)
    F, J, _ = pts.shape
    frames = []
    for f in range(F):
        entry = {"joints": [_point_or_null(pts[f, j]) for j in range(J)]}
        if diagnostics is not None and diagnostics[f]:
            entry["diagnostics"] = diagnostics[f]
        frames.append(entry)
    _dump(path, {"frames": frames, "units": "m"})


def load_poses(path):
    """poses.json -> ((F, J, 3) with NaN for null, list of diagnostics)."""
    with open(path) as f:
        data = json.load(f)
    frames = data.get("frames")
    if not isinstance(frames, list) or not frames:
        raise BadFileFormat(f"{path}: no frames")
    if data.get("units", "m") != "m":
        raise BadFileFormat(f"{path}: unsupported units {data.get('units')!r}")
    num_joints = len(frames[0]["joints"])
    pts = np.full((len(frames), num_joints, 3), np.nan)
    diags = []
    for f, entry in enumerate(frames):
        joints = entry.get("joints", [])
        if len(joints) != num_joints:
            raise BadFileFormat(f"{path}: inconsistent joint count in "
                                f"frame {f}")
        for j, p in enumerate(joints):
            if p is not None:
                pts[f, j] = p
        diags.append(entry.get("diagnostics", {}))
    return pts, diags


def load_weights(path):
    """Weights JSON -> effective multiplier array, (C,) shared or (C, J).

    Unlike :meth:`learn.ConfidenceWeights.from_json` this keeps the
    multipliers as plain values, so files with zeros (cameras switched
    off entirely) are accepted.
    """
    with open(path) as f:
        data = json.load(f)
    try:
        w = np.array(data["weights"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise BadFileFormat(f"{path}: no usable 'weights' entry") from e
    if w.ndim != 2 or not np.isfinite(w).all() or (w < 0).any():
        raise BadFileFormat(f"{path}: weights must be a nonnegative "
                            "camera x joint table")
    if data.get("shared_across_joints", w.shape[1] == 1):
        return w[:, 0]
    return w


def write_manifest(path, command, arguments, seed=None, inputs=(),
                   outputs=()):
    """Record how a run was produced, next to its outputs.

    The wall-clock timestamp makes manifests the one non-reproducible
    file a command writes; data outputs stay byte-identical across
    re-runs with the same flags.
    """
    from . import __version__
    _dump(path, {
        "command": command,
        "arguments": {k: v for k, v in sorted(arguments.items())},
        "seed": seed,
        "tool_version": __version__,
        "inputs": sorted(str(p) for p in inputs),
        "outputs": sorted(str(p) for p in outputs),
        "wall_clock_utc": datetime.datetime.now(
            datetime.timezone.utc).isoformat(),
    })
