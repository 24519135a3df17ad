import json
from dataclasses import replace

import numpy as np
import numpy.testing as npt
import pytest

from triview import (ConfidenceWeights, FitConfig, SceneConfig,
                     evaluate_weighted_vs_unweighted, fit_weights,
                     generate_frames, make_ring_rig)
from triview.errors import DivergedFit, EmptyDataset
from triview.learn import inv_softplus, softplus


def corrupted_dataset(rig, bad_camera=2, shift=20.0):
    """Small noisy dataset where one camera is always off by `shift` px."""
    cfg = SceneConfig(num_cameras=len(rig), num_frames=20, num_joints=5,
                      pixel_noise_sigma=0.5, seed=7)
    frames = []
    for i, f in enumerate(generate_frames(rig, cfg)):
        obs = f.observations.copy()
        rng = np.random.default_rng([99, i])
        ang = rng.uniform(0, 2 * np.pi, obs.shape[1])
        obs[bad_camera] += shift * np.stack([np.cos(ang), np.sin(ang)], -1)
        corrupted = f.corrupted.copy()
        corrupted[bad_camera] = True
        frames.append(replace(f, observations=obs, corrupted=corrupted))
    return frames


class TestConfidenceWeights:
    def test_softplus_round_trip(self):
        x = np.array([-3.0, 0.0, 2.5])
        npt.assert_allclose(inv_softplus(softplus(x)), x, atol=1e-9)

    def test_uniform_effective_is_one(self):
        w = ConfidenceWeights.uniform(4)
        npt.assert_allclose(w.effective, 1.0, atol=1e-12)
        assert w.shared

    def test_json_round_trip(self, tmp_path):
        raw = np.array([[0.3, -1.0], [2.0, 0.1], [0.0, 0.5]])
        w = ConfidenceWeights(raw)
        path = tmp_path / "w.json"
        w.to_json(path)
        again = ConfidenceWeights.from_json(path)
        npt.assert_allclose(again.effective, w.effective, atol=1e-9)
        data = json.loads(path.read_text())
        assert data["parameterization"] == "softplus-raw"
        assert data["shared_across_joints"] is False

    def test_from_json_rejects_nonpositive(self, tmp_path):
        path = tmp_path / "w.json"
        path.write_text(json.dumps({"weights": [[1.0], [0.0]],
                                    "parameterization": "softplus-raw",
                                    "shared_across_joints": True}))
        with pytest.raises(ValueError):
            ConfidenceWeights.from_json(path)


class TestFitConfig:
    def test_defaults(self):
        cfg = FitConfig()
        assert cfg.learning_rate == 0.01 and cfg.steps == 500
        assert cfg.loss == "soft_mse" and not cfg.per_joint

    def test_validation(self):
        with pytest.raises(ValueError):
            FitConfig(learning_rate=-1.0)
        with pytest.raises(ValueError):
            FitConfig(steps=0)
        with pytest.raises(ValueError):
            FitConfig(loss="l2")


class TestFitWeights:
    def test_clean_data_already_optimal(self, ring4):
        frames = generate_frames(ring4, SceneConfig(num_cameras=4,
                                                    num_frames=5,
                                                    num_joints=6, seed=3))
        w, trace = fit_weights(frames, ring4, FitConfig(steps=20))
        assert trace.max() <= 1e-10
        npt.assert_allclose(w.effective, 1.0, atol=1e-6)

    def test_zero_learning_rate_is_null_update(self, ring4):
        frames = corrupted_dataset(ring4)
        w, trace = fit_weights(frames, ring4,
                               FitConfig(learning_rate=0.0, steps=10))
        npt.assert_array_equal(w.effective, np.ones(4))
        assert np.ptp(trace) == 0.0

    def test_corrupted_camera_weight_collapses(self, ring4):
        """The always-wrong camera ends well below the healthy cameras."""
        frames = corrupted_dataset(ring4, bad_camera=2)
        w, trace = fit_weights(frames, ring4,
                               FitConfig(learning_rate=50.0, steps=500))
        eff = w.effective
        others = np.delete(eff, 2).mean()
        assert eff[2] < 0.25 * others
        assert trace[-1] < trace[0]

    def test_descent_after_warmup(self, ring4):
        frames = corrupted_dataset(ring4)
        _, trace = fit_weights(frames, ring4,
                               FitConfig(learning_rate=50.0, steps=300))
        for i in range(50, len(trace) - 50):
            assert trace[i + 50] <= trace[i] + 1e-15

    def test_deterministic(self, ring4):
        frames = corrupted_dataset(ring4)
        cfg = FitConfig(learning_rate=50.0, steps=60)
        w1, t1 = fit_weights(frames, ring4, cfg)
        w2, t2 = fit_weights(frames, ring4, cfg)
        assert np.array_equal(t1, t2) and np.array_equal(w1.raw, w2.raw)

    def test_per_joint_shapes(self, ring4):
        frames = corrupted_dataset(ring4)
        w, _ = fit_weights(frames, ring4,
                           FitConfig(learning_rate=5.0, steps=10,
                                     per_joint=True))
        assert w.raw.shape == (4, 5) and not w.shared

    def test_raw_shift_keeps_initial_points(self, ring4):
        """Uniform raw parameters shifted by a constant stay uniform, and
        uniform weights of any scale triangulate to the same points."""
        from triview.pipeline import algebraic_poses
        frames = corrupted_dataset(ring4)
        uv = np.stack([f.observations for f in frames])
        p1, _, _ = algebraic_poses(ring4, uv, softplus(np.zeros(4)))
        p2, _, _ = algebraic_poses(ring4, uv, softplus(np.zeros(4) + 3.0))
        npt.assert_allclose(p1, p2, atol=1e-9)

    def test_empty_dataset(self, ring4):
        with pytest.raises(EmptyDataset):
            fit_weights([], ring4)

    def test_nonfinite_loss_raises_diverged(self, ring4):
        frames = corrupted_dataset(ring4)[:1]
        broken = replace(frames[0],
                         joints=np.full_like(frames[0].joints, np.nan))
        with pytest.raises(DivergedFit):
            fit_weights([broken], ring4, FitConfig(steps=3))


class TestEvaluate:
    def test_uniform_weights_match_unweighted(self, ring4):
        frames = corrupted_dataset(ring4)
        report = evaluate_weighted_vs_unweighted(
            frames, ring4, ConfidenceWeights.uniform(4))
        assert report["mpjpe_fitted_mm"] == pytest.approx(
            report["mpjpe_uniform_mm"], abs=1e-9)
        assert report["ratio"] == pytest.approx(1.0, abs=1e-9)

    def test_fitted_beats_uniform_on_corruption(self, ring4):
        frames = corrupted_dataset(ring4)
        w, _ = fit_weights(frames, ring4,
                           FitConfig(learning_rate=50.0, steps=300))
        report = evaluate_weighted_vs_unweighted(frames, ring4, w)
        assert report["mpjpe_fitted_mm"] < report["mpjpe_uniform_mm"]
        assert report["ratio"] < 0.8

    def test_empty_heldout(self, ring4):
        with pytest.raises(EmptyDataset):
            evaluate_weighted_vs_unweighted([], ring4,
                                            ConfidenceWeights.uniform(4))
