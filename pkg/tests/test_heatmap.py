import numpy as np
import numpy.testing as npt
import pytest

from triview import (localize_2d, render_gaussian, soft_argmax_2d,
                     spatial_softmax)
from triview.gradcheck import central_difference, relative_error
from triview.heatmap import soft_argmax_2d_backward


class TestSpatialSoftmax:
    def test_constant_map_goes_uniform(self):
        p = spatial_softmax(np.full((6, 9), 3.7), alpha=12.0)
        npt.assert_allclose(p, 1.0 / 54.0, atol=1e-15)

    def test_two_cell_values(self):
        # exp(0) : exp(ln 3) = 1 : 3
        p = spatial_softmax(np.array([[0.0, np.log(3.0)]]), alpha=1.0)
        npt.assert_allclose(p, [[0.25, 0.75]], atol=1e-12)

    def test_high_alpha_concentrates_on_peak(self):
        rng = np.random.default_rng(3)
        h = rng.uniform(0, 0.5, (16, 16))
        h[11, 4] = h.max() + 0.1
        p = spatial_softmax(h, alpha=100.0)
        assert p[11, 4] >= 0.999

    def test_shift_invariance(self):
        rng = np.random.default_rng(4)
        h = rng.normal(size=(8, 8))
        npt.assert_allclose(spatial_softmax(h + 17.3, 5.0),
                            spatial_softmax(h, 5.0), atol=1e-12)

    def test_overflow_safe(self):
        p = spatial_softmax(np.array([[1e6, 0.0]]), alpha=100.0)
        assert np.isfinite(p).all() and p.sum() == pytest.approx(1.0)

    def test_alpha_must_be_positive(self):
        with pytest.raises(ValueError):
            spatial_softmax(np.zeros((2, 2)), alpha=0.0)


class TestSoftArgmax:
    def test_point_mass(self):
        p = np.zeros((10, 12))
        p[3, 7] = 1.0  # row y=3, column x=7
        npt.assert_array_equal(soft_argmax_2d(p), (7.0, 3.0))

    def test_uniform_gives_grid_centroid(self):
        p = np.full((5, 5), 1.0 / 25.0)
        npt.assert_allclose(soft_argmax_2d(p), (2.0, 2.0), atol=1e-12)

    def test_gaussian_center_recovered(self):
        g = render_gaussian((12.5, 20.25), sigma=2.0, width=64, height=64)
        xy = soft_argmax_2d(g / g.sum())
        npt.assert_allclose(xy, (12.5, 20.25), atol=1e-3)

    def test_backward_is_coordinate_grid(self):
        grad = soft_argmax_2d_backward(4, 6)
        assert grad.shape == (2, 4, 6)
        npt.assert_array_equal(grad[0, 0], np.arange(6.0))
        npt.assert_array_equal(grad[1, :, 0], np.arange(4.0))


class TestRenderGaussian:
    def test_on_grid_peak_is_one(self):
        g = render_gaussian((0.0, 0.0), 1.0, 8, 8)
        assert g[0, 0] == 1.0

    def test_one_pixel_falloff(self):
        g = render_gaussian((0.0, 0.0), 1.0, 8, 8)
        npt.assert_allclose(g[0, 1], np.exp(-0.5), atol=1e-12)

    def test_off_grid_center_symmetry(self):
        g = render_gaussian((1.5, 0.0), 1.0, 8, 8)
        assert g[0, 1] == g[0, 2]

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError):
            render_gaussian((0, 0), 0.0, 4, 4)


def test_temperature_limit_approaches_argmax():
    """Higher alpha pulls the soft estimate toward the hard argmax cell."""
    rng = np.random.default_rng(18)  # argmax away from the grid centroid
    h = rng.uniform(0, 1, (9, 9))
    iy, ix = np.unravel_index(h.argmax(), h.shape)
    target = np.array([ix, iy], dtype=float)
    dists = []
    for alpha in (1.0, 10.0, 100.0, 1000.0):
        xy = soft_argmax_2d(spatial_softmax(h, alpha))
        dists.append(np.linalg.norm(xy - target))
    assert all(a > b for a, b in zip(dists, dists[1:]))
    assert dists[-1] < 1e-6


def test_localize_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    h = rng.normal(size=(8, 8))
    alpha = 2.0
    _, grad = localize_2d(h, alpha)
    for k in range(2):
        fd = central_difference(
            lambda v: soft_argmax_2d(spatial_softmax(v, alpha))[k], h, 1e-5)
        assert relative_error(grad[k], fd) <= 1e-4
