import numpy as np
import pytest
from scipy import ndimage

from chromadot import imageops


def naive_sobel(img, kernel):
    """Loop-based replicate-padded 3x3 correlation (oracle)."""
    h, w = img.shape
    padded = np.pad(img, 1, mode="edge")
    out = np.zeros_like(img, dtype=np.float64)
    for v in range(h):
        for u in range(w):
            out[v, u] = np.sum(padded[v:v + 3, u:u + 3] * kernel)
    return out


class TestLcn:
    def test_constant_image_all_zeros(self):
        for value in (0.0, 1.0, 42.0):
            out = imageops.lcn(np.full((16, 20), value), window=11)
            assert np.array_equal(out, np.zeros((16, 20)))

    def test_hand_computed_center_value(self):
        # 3x3 image, center 1 else 0, window 3: mu = 1/9, sigma = sqrt(8/81)
        img = np.zeros((3, 3))
        img[1, 1] = 1.0
        eta = 1e-4
        out = imageops.lcn(img, window=3, eta=eta)
        mu = 1.0 / 9.0
        sigma = np.sqrt(8.0 / 81.0)
        assert out[1, 1] == pytest.approx((1.0 - mu) / (sigma + eta), rel=1e-12)

    def test_gain_invariance(self):
        # bounded (uniform) noise with sigma ~ 0.29 >> eta: deviation < 1e-3
        rng = np.random.default_rng(0)
        img = rng.uniform(0.0, 1.0, (64, 64, 3))
        a = imageops.lcn(img, eta=1e-4)
        b = imageops.lcn(10.0 * img, eta=1e-4)
        assert np.max(np.abs(a - b)) < 1e-3

    def test_local_mean_near_zero(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0.0, 1.0, (80, 80))
        out = imageops.lcn(img)
        local_mean = ndimage.uniform_filter(out, size=11, mode="nearest")
        assert np.mean(np.abs(local_mean)) < 0.1

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            imageops.lcn(np.zeros((8, 8)), window=4)
        with pytest.raises(ValueError):
            imageops.lcn(np.zeros((8, 8)), eta=0.0)


class TestWarp:
    def test_identity_is_bit_exact(self):
        rng = np.random.default_rng(2)
        field = rng.standard_normal((12, 30, 3))
        out = imageops.warp_by_disparity(field, np.zeros((12, 30)))
        assert np.array_equal(out, field)

    def test_integer_shift(self):
        field = np.tile(np.arange(20.0), (5, 1))
        out = imageops.warp_by_disparity(field, np.full((5, 20), 3.0))
        assert np.array_equal(out[:, 3:], field[:, :17])
        assert np.all(np.isnan(out[:, :3]))

    def test_half_pixel_on_ramp_is_exact(self):
        # bilinear interpolation is exact on affine data
        slope = 2.5
        field = np.tile(slope * np.arange(20.0), (4, 1))
        out = imageops.warp_by_disparity(field, np.full((4, 20), 0.5))
        np.testing.assert_allclose(out[:, 1:], field[:, 1:] - 0.5 * slope, rtol=1e-15)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        f1 = rng.standard_normal((10, 25))
        f2 = rng.standard_normal((10, 25))
        d = rng.uniform(0.0, 5.0, (10, 25))
        a, b = 1.7, -0.4
        lhs = imageops.warp_by_disparity(a * f1 + b * f2, d)
        rhs = (a * imageops.warp_by_disparity(f1, d)
               + b * imageops.warp_by_disparity(f2, d))
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)

    def test_round_trip_integer_disparity(self):
        rng = np.random.default_rng(4)
        field = rng.standard_normal((6, 40))
        d = 5.0
        fwd = imageops.warp_by_disparity(field, np.full((6, 40), d))
        back = imageops.warp_by_disparity(fwd, np.full((6, 40), -d))
        interior = slice(0, 35)  # u + d <= W-1 keeps the forward sample valid
        assert np.array_equal(back[:, interior], field[:, interior])

    def test_nan_disparity_gives_nan(self):
        field = np.ones((3, 5))
        d = np.zeros((3, 5))
        d[1, 2] = np.nan
        out = imageops.warp_by_disparity(field, d)
        assert np.isnan(out[1, 2])
        assert np.sum(np.isnan(out)) == 1

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            imageops.warp_by_disparity(np.ones((3, 5)), np.zeros((3, 4)))


class TestSobel:
    def test_constant_image_zero_gradients(self):
        gv, gh = imageops.sobel_gradients(np.full((7, 9), 3.3))
        assert np.array_equal(gv, np.zeros((7, 9)))
        assert np.array_equal(gh, np.zeros((7, 9)))

    def test_horizontal_ramp_interior_is_eight(self):
        img = np.tile(np.arange(12.0), (6, 1))
        _, gh = imageops.sobel_gradients(img)
        assert np.array_equal(gh[:, 1:-1], np.full((6, 10), 8.0))

    def test_transpose_equivariance(self):
        rng = np.random.default_rng(5)
        img = rng.standard_normal((9, 14))
        gv, gh = imageops.sobel_gradients(img)
        gv_t, gh_t = imageops.sobel_gradients(img.T)
        np.testing.assert_allclose(gh_t, gv.T, rtol=1e-14)
        np.testing.assert_allclose(gv_t, gh.T, rtol=1e-14)

    def test_matches_naive_convolution(self):
        rng = np.random.default_rng(6)
        img = rng.standard_normal((8, 11))
        gv, gh = imageops.sobel_gradients(img)
        np.testing.assert_allclose(gh, naive_sobel(img, imageops.SOBEL_H), atol=1e-12)
        np.testing.assert_allclose(gv, naive_sobel(img, imageops.SOBEL_V), atol=1e-12)

    def test_degenerate_size_rejected(self):
        with pytest.raises(ValueError):
            imageops.sobel_gradients(np.zeros((2, 5)))


class TestCensus:
    def test_equal_images_zero(self):
        rng = np.random.default_rng(7)
        img = rng.standard_normal((10, 12, 3))
        dist = imageops.smooth_census_distance(img, img)
        assert np.array_equal(dist, np.zeros((10, 12)))

    def test_sign_flip_saturates_to_one(self):
        # high contrast relative to eps: |differences| >> eps on the interior,
        # so phi saturates to +/-1 and sign-flipped comparisons approach 1
        rng = np.random.default_rng(8)
        img = rng.uniform(0.0, 1.0, (20, 20)) * 1e4 * imageops.CENSUS_EPS
        dist = imageops.smooth_census_distance(img, -img)
        r = imageops.CENSUS_WINDOW // 2
        interior = dist[r:-r, r:-r]
        assert np.mean(interior) > 0.98
        assert np.all(interior > 0.95)

    def test_brightness_invariance_exact(self):
        # dyadic values keep x + 5 exact, so pairwise differences are
        # bit-identical and the distance is exactly zero
        rng = np.random.default_rng(9)
        img = rng.integers(0, 32, (9, 9, 2)).astype(np.float64) / 16.0
        dist = imageops.smooth_census_distance(img, img + 5.0)
        assert np.array_equal(dist, np.zeros((9, 9)))

    def test_symmetry(self):
        rng = np.random.default_rng(10)
        a = rng.standard_normal((8, 8))
        b = rng.standard_normal((8, 8))
        np.testing.assert_array_equal(imageops.smooth_census_distance(a, b),
                                      imageops.smooth_census_distance(b, a))

    def test_range_zero_one(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((8, 8, 3)) * 50
        b = rng.standard_normal((8, 8, 3)) * 50
        dist = imageops.smooth_census_distance(a, b)
        assert np.all((dist >= 0.0) & (dist <= 1.0))

    def test_nan_poisons_window(self):
        a = np.ones((7, 7))
        a[3, 3] = np.nan
        dist = imageops.smooth_census_distance(a, np.ones((7, 7)))
        assert np.isnan(dist[3, 3]) and np.isnan(dist[3, 2])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            imageops.smooth_census_distance(np.ones((4, 4)), np.ones((4, 5)))


class TestShadowBinarize:
    def test_all_zero_image(self):
        assert not np.any(imageops.shadow_binarize(np.zeros((5, 5, 3)), 0.0))

    def test_zero_threshold_positive_image(self):
        assert np.all(imageops.shadow_binarize(np.full((5, 5, 3), 0.1), 0.0))

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            imageops.shadow_binarize(np.ones((4, 4)), -1.0)

    def test_agrees_with_renderer_mask(self, plane_sample):
        threshold = 0.01 * float(plane_sample.image_I.max())
        est = imageops.shadow_binarize(plane_sample.image_I, threshold)
        agreement = np.mean(est == plane_sample.mask_V)
        assert agreement >= 0.99


class TestAdjoint:
    def test_correlate_adjoint_identity(self):
        # <C x, g> == <x, C^T g> for the replicate-padded correlation
        rng = np.random.default_rng(12)
        for kernel in (imageops.SOBEL_H, imageops.SOBEL_V):
            x = rng.standard_normal((9, 13))
            g = rng.standard_normal((9, 13))
            cx = ndimage.correlate(x, kernel, mode="nearest")
            ctg = imageops.correlate3x3_adjoint(g, kernel)
            assert np.sum(cx * g) == pytest.approx(np.sum(x * ctg), rel=1e-12)
