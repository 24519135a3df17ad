import numpy as np
import numpy.testing as npt
import pytest

from triview.gradcheck import (CHECKS, central_difference, relative_error,
                               run_suite)


class TestRelativeError:
    def test_identical_is_zero(self):
        g = np.random.default_rng(0).normal(size=(4, 5))
        assert relative_error(g, g) == 0.0

    def test_scale_normalized(self):
        # deviation 1 against magnitude 1001: scaled by the larger side
        g = np.array([1000.0, 0.0])
        assert relative_error(g, g + [1.0, 0.0]) == pytest.approx(1 / 1001.0)

    def test_catches_sign_flip(self):
        g = np.array([1.0, -2.0])
        assert relative_error(g, -g) > 1.0

    def test_zero_against_zero(self):
        assert relative_error(np.zeros(3), np.zeros(3)) == 0.0


def test_central_difference_quadratic_exact():
    # f(x) = x . A x has gradient (A + A^T) x; central differences are
    # exact for quadratics up to roundoff
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 4))
    x = rng.normal(size=4)
    fd = central_difference(lambda v: v @ A @ v, x, 1e-5)
    npt.assert_allclose(fd, (A + A.T) @ x, atol=1e-8)


def test_central_difference_preserves_input():
    x = np.array([1.0, 2.0])
    central_difference(lambda v: (v ** 2).sum(), x, 1e-5)
    npt.assert_array_equal(x, [1.0, 2.0])


class TestSuite:
    def test_all_checks_present(self):
        assert set(CHECKS) == {"triangulate", "soft_argmax_2d",
                               "soft_argmax_3d", "soft_mse", "vol_l1"}

    def test_small_suite_passes(self):
        report = run_suite(trials=3, seed=0)
        assert report["worst"] <= 1e-4
        assert report["worst_check"] in CHECKS
        assert set(report["per_check"]) == set(CHECKS)

    def test_deterministic(self):
        a = run_suite(trials=2, seed=5)
        b = run_suite(trials=2, seed=5)
        assert a == b

    def test_seed_changes_instances(self):
        a = run_suite(trials=2, seed=1)
        b = run_suite(trials=2, seed=2)
        assert a != b
