import json
import struct

import numpy as np
import numpy.testing as npt
import pytest

from triview.errors import BadFileFormat
from triview.formats import (load_keypoints, load_poses, load_weights,
                             read_hmap, save_keypoints, save_poses,
                             write_hmap, write_manifest)


class TestHmap:
    def test_round_trip_rank2(self, tmp_path):
        m = np.random.default_rng(0).normal(size=(5, 9)).astype(np.float32)
        p = tmp_path / "m.hmap"
        write_hmap(p, m)
        npt.assert_array_equal(read_hmap(p), m)

    def test_round_trip_rank3(self, tmp_path):
        v = np.random.default_rng(1).normal(size=(3, 4, 6)).astype(np.float32)
        p = tmp_path / "v.hmap"
        write_hmap(p, v)
        out = read_hmap(p)
        assert out.dtype == np.float32
        npt.assert_array_equal(out, v)

    def test_byte_layout(self, tmp_path):
        """magic, u8 rank, u32 dims fastest-varying first, f32 payload."""
        m = np.arange(6, dtype=np.float32).reshape(2, 3)  # H=2, W=3
        p = tmp_path / "m.hmap"
        write_hmap(p, m)
        blob = p.read_bytes()
        assert blob[:4] == b"HMAP"
        assert blob[4] == 2
        assert struct.unpack("<2I", blob[5:13]) == (3, 2)  # (W, H)
        npt.assert_array_equal(np.frombuffer(blob[13:], dtype="<f4"),
                               m.ravel())

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.hmap"
        p.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(BadFileFormat):
            read_hmap(p)

    def test_bad_rank(self, tmp_path):
        p = tmp_path / "x.hmap"
        p.write_bytes(b"HMAP" + struct.pack("<B", 4) + bytes(16))
        with pytest.raises(BadFileFormat):
            read_hmap(p)

    def test_truncated_payload(self, tmp_path):
        m = np.ones((4, 4), dtype=np.float32)
        p = tmp_path / "m.hmap"
        write_hmap(p, m)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(BadFileFormat):
            read_hmap(p)

    def test_rejects_other_ranks(self, tmp_path):
        with pytest.raises(ValueError):
            write_hmap(tmp_path / "x.hmap", np.zeros(5))


class TestKeypoints:
    def test_round_trip_with_occlusions(self, tmp_path):
        rng = np.random.default_rng(2)
        uv = rng.uniform(0, 384, (3, 2, 5, 2))
        uv[1, 0, 3] = np.nan
        p = tmp_path / "kp.json"
        save_keypoints(p, uv, ["cam0", "cam1"])
        names, again = load_keypoints(p, ["cam0", "cam1"])
        assert names == ["cam0", "cam1"]
        npt.assert_allclose(again, uv, atol=1e-12, equal_nan=True)

    def test_null_encodes_occlusion(self, tmp_path):
        uv = np.full((1, 1, 2, 2), np.nan)
        uv[0, 0, 0] = (1.0, 2.0)
        p = tmp_path / "kp.json"
        save_keypoints(p, uv, ["c"])
        data = json.loads(p.read_text())
        joints = data["frames"][0]["cameras"]["c"]["joints"]
        assert joints[0] == [1.0, 2.0] and joints[1] is None

    def test_missing_camera_rejected(self, tmp_path):
        uv = np.zeros((1, 1, 2, 2))
        p = tmp_path / "kp.json"
        save_keypoints(p, uv, ["a"])
        with pytest.raises(BadFileFormat):
            load_keypoints(p, ["a", "b"])

    def test_inconsistent_joint_count_rejected(self, tmp_path):
        p = tmp_path / "kp.json"
        p.write_text(json.dumps({"frames": [
            {"cameras": {"a": {"joints": [[0, 0], [1, 1]]}}},
            {"cameras": {"a": {"joints": [[0, 0]]}}}]}))
        with pytest.raises(BadFileFormat):
            load_keypoints(p)

    def test_deterministic_bytes(self, tmp_path):
        uv = np.random.default_rng(3).uniform(0, 10, (2, 2, 3, 2))
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_keypoints(p1, uv, ["x", "y"])
        save_keypoints(p2, uv, ["x", "y"])
        assert p1.read_bytes() == p2.read_bytes()


class TestPoses:
    def test_round_trip_with_nulls(self, tmp_path):
        pts = np.random.default_rng(4).normal(size=(2, 4, 3))
        pts[0, 2] = np.nan
        p = tmp_path / "poses.json"
        save_poses(p, pts, diagnostics=[{"note": 1}, {}])
        again, diags = load_poses(p)
        npt.assert_allclose(again, pts, atol=1e-12, equal_nan=True)
        assert diags == [{"note": 1}, {}]
        assert json.loads(p.read_text())["units"] == "m"

    def test_bad_units_rejected(self, tmp_path):
        p = tmp_path / "poses.json"
        p.write_text(json.dumps({"frames": [{"joints": [[0, 0, 0]]}],
                                 "units": "mm"}))
        with pytest.raises(BadFileFormat):
            load_poses(p)

    def test_empty_rejected(self, tmp_path):
        p = tmp_path / "poses.json"
        p.write_text(json.dumps({"frames": []}))
        with pytest.raises(BadFileFormat):
            load_poses(p)


class TestWeights:
    def write(self, path, obj):
        path.write_text(json.dumps(obj))
        return path

    def test_shared_column_collapses(self, tmp_path):
        p = self.write(tmp_path / "w.json",
                       {"weights": [[1.0], [0.5], [2.0]],
                        "parameterization": "softplus-raw",
                        "shared_across_joints": True})
        w = load_weights(p)
        npt.assert_array_equal(w, [1.0, 0.5, 2.0])

    def test_per_joint_table(self, tmp_path):
        p = self.write(tmp_path / "w.json",
                       {"weights": [[1.0, 2.0], [0.5, 0.0]],
                        "shared_across_joints": False})
        w = load_weights(p)
        assert w.shape == (2, 2)

    def test_zeros_allowed(self, tmp_path):
        # a camera switched off entirely is representable
        p = self.write(tmp_path / "w.json", {"weights": [[0.0], [0.0]]})
        npt.assert_array_equal(load_weights(p), [0.0, 0.0])

    def test_negative_rejected(self, tmp_path):
        p = self.write(tmp_path / "w.json", {"weights": [[1.0], [-0.1]]})
        with pytest.raises(BadFileFormat):
            load_weights(p)

    def test_missing_key_rejected(self, tmp_path):
        p = self.write(tmp_path / "w.json", {"w": [1, 2]})
        with pytest.raises(BadFileFormat):
            load_weights(p)


def test_manifest_records_run(tmp_path):
    p = tmp_path / "run.manifest.json"
    write_manifest(p, "simulate", {"frames": 3, "out": "ds"}, seed=7,
                   inputs=["a.json"], outputs=["b.json"])
    m = json.loads(p.read_text())
    assert m["command"] == "simulate"
    assert m["seed"] == 7
    assert m["arguments"]["frames"] == 3
    assert m["inputs"] == ["a.json"] and m["outputs"] == ["b.json"]
    assert "wall_clock_utc" in m and "tool_version" in m
