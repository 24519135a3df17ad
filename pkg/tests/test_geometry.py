import numpy as np
import numpy.testing as npt
import pytest
from scipy.spatial.transform import Rotation

from triview import (Camera, CropTransform, Rig, apply_crop, compose,
                     decompose, heatmap_projection, invert_crop, load_cameras,
                     project, project_points, save_cameras)
from triview.errors import DegenerateProjection, SingularCamera

IDENTITY_P = np.hstack([np.eye(3), np.zeros((3, 1))])


class TestProject:
    def test_identity_camera(self):
        cam = Camera("c", IDENTITY_P, (100, 100))
        u, v, depth = project(cam, (0.0, 0.0, 2.0))
        assert (u, v, depth) == (0.0, 0.0, 2.0)

    def test_pinhole_scaling(self):
        K = np.diag([100.0, 100.0, 1.0])
        cam = Camera.from_krt("c", K, np.eye(3), np.zeros(3), (200, 200))
        u, v, _ = project(cam, (0.1, 0.2, 2.0))
        npt.assert_allclose((u, v), (5.0, 10.0), atol=1e-12)

    def test_zero_depth_raises(self):
        cam = Camera("c", IDENTITY_P, (100, 100))
        with pytest.raises(DegenerateProjection):
            project(cam, (0.3, -0.1, 0.0))

    def test_project_points_matches_scalar(self):
        rng = np.random.default_rng(0)
        cam = Camera.from_krt("c", np.diag([120.0, 110.0, 1.0]), np.eye(3),
                              np.array([0.0, 0.0, 1.0]), (256, 256))
        pts = rng.uniform(-1, 1, (20, 3)) + np.array([0, 0, 4.0])
        uv, z = project_points(cam, pts)
        for i in range(len(pts)):
            u, v, d = project(cam, pts[i])
            npt.assert_allclose(uv[i], (u, v), rtol=1e-12)
            npt.assert_allclose(z[i], d, rtol=1e-12)

    def test_project_points_nan_on_zero_depth(self):
        cam = Camera("c", IDENTITY_P, (100, 100))
        uv, _ = project_points(cam, [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert np.isnan(uv[0]).all() and np.isfinite(uv[1]).all()


class TestCrop:
    def test_identity_is_noop(self):
        npt.assert_array_equal(
            apply_crop(CropTransform.identity(), (3.0, 5.0)), (3.0, 5.0))

    def test_offset_and_scale(self):
        t = CropTransform(offset=(10.0, 20.0), scale=(4.0, 4.0))
        npt.assert_array_equal(apply_crop(t, (3.0, 5.0)), (22.0, 40.0))

    def test_invert_round_trip(self):
        t = CropTransform(offset=(-7.5, 3.25), scale=(4.0, 2.0))
        pts = np.random.default_rng(1).uniform(-50, 50, (10, 2))
        back = apply_crop(invert_crop(t), apply_crop(t, pts))
        npt.assert_allclose(back, pts, atol=1e-12)

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(ValueError):
            CropTransform(scale=(0.0, 1.0))


class TestDecompose:
    def test_round_trip_random(self):
        """compose -> decompose recovers K, R, t up to float roundoff."""
        rng = np.random.default_rng(7)
        for _ in range(10):
            K = np.array([[rng.uniform(80, 120), rng.uniform(-2, 2), rng.uniform(30, 60)],
                          [0.0, rng.uniform(80, 120), rng.uniform(30, 60)],
                          [0.0, 0.0, 1.0]])
            R = Rotation.random(random_state=int(rng.integers(1 << 30))).as_matrix()
            t = rng.uniform(-3, 3, 3)
            K2, R2, t2 = decompose(compose(K, R, t))
            npt.assert_allclose(K2, K, atol=1e-9)
            npt.assert_allclose(R2, R, atol=1e-9)
            npt.assert_allclose(t2, t, atol=1e-9)

    def test_negated_projection_same_camera(self):
        # P and -P are the same camera; decompose must normalize the sign
        K = np.diag([100.0, 100.0, 1.0])
        R = Rotation.from_euler("y", 0.3).as_matrix()
        t = np.array([0.1, -0.2, 3.0])
        K2, R2, t2 = decompose(-compose(K, R, t))
        npt.assert_allclose(K2, K, atol=1e-9)
        npt.assert_allclose(R2, R, atol=1e-9)
        npt.assert_allclose(t2, t, atol=1e-9)

    def test_singular_left_block_raises(self):
        P = IDENTITY_P.copy()
        P[2, :3] = 0.0
        with pytest.raises(SingularCamera):
            decompose(P)


def test_camera_rejects_inconsistent_krt():
    K = np.diag([100.0, 100.0, 1.0])
    with pytest.raises(ValueError):
        Camera(name="c", projection=IDENTITY_P, image_size=(10, 10),
               K=K, R=np.eye(3), t=np.zeros(3))


def test_rig_duplicate_names_rejected():
    c = Camera("same", IDENTITY_P, (10, 10))
    with pytest.raises(ValueError):
        Rig((c, Camera("same", IDENTITY_P * 2.0, (10, 10))))


def test_rig_subset_preserves_order(ring4):
    sub = ring4.subset([2, 0])
    assert [c.name for c in sub.cameras] == [ring4[2].name, ring4[0].name]


def test_heatmap_projection_composes_inverse_crop(ring4):
    """Projecting with the fused matrix equals project -> image->heatmap map."""
    crop = CropTransform(offset=(1.5, -2.0), scale=(4.0, 4.0))
    cam = ring4[1]
    P = heatmap_projection(cam, crop)
    pt = np.array([0.2, 1.1, -0.3])
    u, v, _ = project(cam, pt)
    expect = apply_crop(invert_crop(crop), (u, v))
    ph = P @ np.append(pt, 1.0)
    npt.assert_allclose(ph[:2] / ph[2], expect, atol=1e-9)


def test_save_load_cameras_round_trip(tmp_path, ring4):
    path = tmp_path / "cameras.json"
    save_cameras(path, ring4)
    again = load_cameras(path)
    assert len(again) == len(ring4)
    for a, b in zip(ring4.cameras, again.cameras):
        assert a.name == b.name and a.image_size == b.image_size
        npt.assert_allclose(a.projection, b.projection, atol=1e-12)
