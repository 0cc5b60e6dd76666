import numpy as np
import pytest

import chromadot as cd
from chromadot import basis as bm


@pytest.fixture(scope="module")
def system_matrix(sensitivity, primaries):
    return bm.build_system_matrix(sensitivity, primaries)


@pytest.fixture(scope="module")
def model(grid):
    corpus = cd.make_reflectance_corpus(200, grid, seed=42)
    return bm.fit_basis(corpus, k=8)


def in_span_reflectance(model, rng, scale=0.5):
    """A reflectance exactly in span(basis)+mean that stays inside [0, 1]."""
    for _ in range(100):
        coeffs = scale * rng.standard_normal(model.k)
        vals = model.mean.values + model.basis @ coeffs
        if np.all((vals >= 0.0) & (vals <= 1.0)):
            return cd.Spectrum.reflectance(model.grid, vals), coeffs
        scale *= 0.7
    raise AssertionError("could not draw an in-span reflectance")


class TestSystemMatrix:
    def test_disjoint_boxes_give_three_nonzero_rows(self, grid):
        ch = np.zeros((3, 27))
        for n in range(3):
            ch[n, 9 * n:9 * n + 9] = 1.0
        c = cd.CameraSensitivity(grid, ch)
        prim = cd.ProjectorPrimaries(
            grid,
            r_primary=cd.Spectrum.illumination(grid, ch[0]),
            g_primary=cd.Spectrum.illumination(grid, ch[1]),
            b_primary=cd.Spectrum.illumination(grid, ch[2]),
        )
        m = bm.build_system_matrix(c, prim)
        nonzero_rows = np.flatnonzero(np.any(m != 0.0, axis=1))
        # only matching (illumination, channel) products survive: rows (i, n=i)
        assert np.array_equal(nonzero_rows, [0, 4, 8])

    def test_all_ones_rows(self, grid):
        ones = np.ones(27)
        c = cd.CameraSensitivity(grid, np.tile(ones, (3, 1)))
        prim = cd.ProjectorPrimaries(
            grid, *[cd.Spectrum.illumination(grid, ones) for _ in range(3)])
        m = bm.build_system_matrix(c, prim)
        assert np.array_equal(m, np.ones((9, 27)))

    def test_consistent_with_render_pixel(self, grid, sensitivity, primaries,
                                          system_matrix):
        rng = np.random.default_rng(0)
        prim = primaries.as_tuple()
        for _ in range(100):
            r = cd.Spectrum.reflectance(grid, rng.uniform(0, 1, 27))
            stacked = np.concatenate([
                cd.render_pixel(1.0, sensitivity, prim[i], r) for i in range(3)])
            np.testing.assert_allclose(system_matrix @ r.values, stacked, rtol=1e-12)

    def test_grid_mismatch(self, sensitivity):
        other = cd.default_primaries(cd.WavelengthGrid(400.0, 10.0, 27))
        with pytest.raises(cd.GridMismatchError):
            bm.build_system_matrix(sensitivity, other)

    def test_rank_is_nine(self, system_matrix):
        assert np.linalg.matrix_rank(system_matrix) == 9


class TestConditionNumbers:
    def test_identity(self):
        assert bm.condition_number(np.eye(3)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert bm.condition_number(np.diag([1.0, 2.0])) == pytest.approx(2.0)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            bm.condition_number(np.zeros((3, 3)))

    def test_default_spectra_ill_posed(self, system_matrix):
        assert bm.condition_number(system_matrix) > 100.0

    def test_single_column_basis_conditions_to_one(self, system_matrix, grid):
        b = np.full((27, 1), 1.0 / np.sqrt(27.0))
        model = bm.BasisModel(basis=b,
                              mean=cd.Spectrum.reflectance(grid, np.zeros(27)),
                              smoothness=bm.second_difference_operator(27))
        assert bm.condition_number_reduced(system_matrix, model, 0.5) == pytest.approx(1.0)

    def test_reduction_factor_at_least_ten(self, system_matrix, model):
        raw = bm.condition_number(system_matrix)
        _, reduced = bm.sweep_smoothness(system_matrix, model)
        assert reduced * 10.0 <= raw

    def test_smoothness_never_hurts_when_small_sv_binds(self, system_matrix, model):
        base = bm.condition_number_reduced(system_matrix, model, 0.0)
        for w in (1e-4, 1e-3, 1e-2, 1e-1, 1.0):
            assert bm.condition_number_reduced(system_matrix, model, w) <= base

    def test_large_weight_limit_is_smoothness_conditioning(self, system_matrix, model):
        limit = bm.condition_number(model.smoothness @ model.basis)
        at_1e6 = bm.condition_number_reduced(system_matrix, model, 1e6)
        at_1e10 = bm.condition_number_reduced(system_matrix, model, 1e10)
        assert at_1e6 == pytest.approx(limit, rel=5e-2)
        assert at_1e10 == pytest.approx(limit, rel=1e-3)
        assert abs(at_1e10 - limit) < abs(at_1e6 - limit)


class TestFitBasis:
    def test_repeated_spectrum_mean(self, grid):
        s = cd.make_reflectance_corpus(1, grid, seed=3)[0]
        model = bm.fit_basis([s] * 10, k=2)
        np.testing.assert_allclose(model.mean.values, s.values, atol=1e-12)
        # centered data is zero: any orthonormal basis reconstructs exactly
        res = s.values - model.mean.values
        assert np.linalg.norm(res) < 1e-10

    def test_k_dimensional_corpus_exact(self, grid):
        rng = np.random.default_rng(5)
        k = 4
        directions = rng.standard_normal((k, 27)) * 0.05
        base = np.full(27, 0.5)
        corpus = [cd.Spectrum.reflectance(grid, base + directions.T @ rng.standard_normal(k))
                  for _ in range(50)]
        model = bm.fit_basis(corpus, k=k)
        for s in corpus:
            centered = s.values - model.mean.values
            recon = model.basis @ (model.basis.T @ centered)
            assert np.linalg.norm(recon - centered) < 1e-10

    def test_energy_ordering(self, grid):
        corpus = cd.make_reflectance_corpus(100, grid, seed=6)
        model = bm.fit_basis(corpus, k=8)
        data = np.stack([s.values for s in corpus]) - model.mean.values
        energies = np.sum((data @ model.basis) ** 2, axis=0)
        assert np.all(np.diff(energies) <= 1e-9)

    def test_orthonormal_columns(self, model):
        gram = model.basis.T @ model.basis
        np.testing.assert_allclose(gram, np.eye(model.k), atol=1e-10)

    def test_insufficient_corpus(self, grid):
        corpus = cd.make_reflectance_corpus(5, grid, seed=7)
        with pytest.raises(ValueError):
            bm.fit_basis(corpus, k=8)


class TestReconstructWindow:
    def test_in_span_round_trip(self, system_matrix, model):
        rng = np.random.default_rng(8)
        for _ in range(20):
            r, _ = in_span_reflectance(model, rng)
            labels = rng.integers(0, 3, 9)
            labels[:3] = [0, 1, 2]  # ensure all three labels
            shading = rng.uniform(0.5, 2.0, 9)
            rgb = np.stack([
                shading[p] * system_matrix[3 * labels[p]:3 * labels[p] + 3] @ r.values
                for p in range(9)])
            rec = bm.reconstruct_window(rgb, labels, system_matrix, model,
                                        shading=shading)
            rmse = np.sqrt(np.mean((rec.spectrum.values - r.values) ** 2))
            assert rmse < 1e-3
            assert not rec.low_confidence

    def test_full_rank_round_trip_is_exact(self, system_matrix, model):
        rng = np.random.default_rng(9)
        r, _ = in_span_reflectance(model, rng)
        labels = np.array([0, 1, 2, 0, 1, 2, 0, 1, 2])
        rgb = np.stack([system_matrix[3 * l:3 * l + 3] @ r.values for l in labels])
        rec = bm.reconstruct_window(rgb, labels, system_matrix, model,
                                    shading=np.ones(9))
        assert np.max(np.abs(rec.spectrum.values - r.values)) < 1e-9

    def test_single_label_minimum_norm(self, system_matrix, model):
        rng = np.random.default_rng(10)
        r, _ = in_span_reflectance(model, rng)
        labels = np.zeros(9, dtype=int)  # only the R illumination
        rgb = np.stack([system_matrix[0:3] @ r.values for _ in range(9)])
        rec = bm.reconstruct_window(rgb, labels, system_matrix, model,
                                    shading=np.ones(9))
        assert rec.low_confidence
        # minimum-norm fit honors the three available equations exactly
        residual = system_matrix[0:3] @ rec.unclipped(model) - rgb[0]
        assert np.linalg.norm(residual) < 1e-9

    def test_zero_intensities(self, system_matrix, model):
        # degenerate zero observations: solution is the plain least-squares
        # answer to a zero RHS (direct lstsq oracle); output stays a
        # clipped, mean-anchored reflectance
        labels = np.array([0, 1, 2] * 3)
        rec = bm.reconstruct_window(np.zeros((9, 3)), labels, system_matrix, model,
                                    shading=np.ones(9))
        expected, _, _, _ = np.linalg.lstsq(system_matrix @ model.basis,
                                            -(system_matrix @ model.mean.values),
                                            rcond=None)
        np.testing.assert_allclose(rec.coefficients, expected, atol=1e-9)
        assert np.all((rec.spectrum.values >= 0.0) & (rec.spectrum.values <= 1.0))
        assert not rec.low_confidence

    def test_joint_scale_mode_recovers_shading(self, system_matrix, model):
        rng = np.random.default_rng(11)
        r, _ = in_span_reflectance(model, rng)
        labels = np.array([0, 1, 2, 0, 1, 2, 0, 1, 2])
        s_true = 1.7
        rgb = np.stack([s_true * (system_matrix[3 * l:3 * l + 3] @ r.values)
                        for l in labels])
        rec = bm.reconstruct_window(rgb, labels, system_matrix, model, shading=None)
        rmse = np.sqrt(np.mean((rec.spectrum.values - r.values) ** 2))
        assert rmse < 1e-6

    def test_scale_consistency_of_homogeneous_solver(self, system_matrix, model):
        # un-normalized coefficient solution scales linearly with the data
        rng = np.random.default_rng(12)
        y = np.abs(rng.standard_normal(9))
        available = np.ones(9, dtype=bool)
        a1 = bm.solve_coefficients(y, available, system_matrix, model, 1e-2,
                                   include_mean=False)
        a2 = bm.solve_coefficients(3.5 * y, available, system_matrix, model, 1e-2,
                                   include_mean=False)
        np.testing.assert_allclose(a2, 3.5 * a1, rtol=1e-10)

    def test_negative_intensities_rejected(self, system_matrix, model):
        with pytest.raises(ValueError):
            bm.reconstruct_window(-np.ones((9, 3)), np.zeros(9, dtype=int),
                                  system_matrix, model, shading=np.ones(9))


@pytest.fixture(scope="module")
def span_scene_sample(desk_rig, desk_pattern, primaries, sensitivity, grid, model):
    rng = np.random.default_rng(13)
    refl, _ = in_span_reflectance(model, rng)
    scene = cd.Scene((cd.Plane("z", 0.5),), (refl,), grid=grid)
    sample, aux = cd.render_scene(scene, desk_rig, desk_pattern, primaries,
                                  sensitivity, return_aux=True)
    return sample, aux, refl


class TestReconstructImage:
    def test_flat_plane_round_trip(self, span_scene_sample, system_matrix, model,
                                   desk_pattern):
        sample, aux, refl = span_scene_sample
        result = cd.reconstruct_image(sample.image_I.astype(np.float64),
                                      sample.disparity_gt, desk_pattern,
                                      system_matrix, model,
                                      mask=sample.mask_V, shading=aux.shading)
        # under-determined windows are flagged; the quality claim is over
        # the fully-determined ones
        sel = result.valid & sample.mask_V & ~result.low_confidence
        assert np.mean(sel) > 0.5
        err = result.reflectance[sel] - refl.values
        rmse = np.sqrt(np.mean(err ** 2))
        assert rmse < 5e-3

    def test_perturbed_disparity_degrades(self, span_scene_sample, system_matrix,
                                          model, desk_pattern):
        sample, aux, refl = span_scene_sample
        def run(d):
            result = cd.reconstruct_image(sample.image_I.astype(np.float64), d,
                                          desk_pattern, system_matrix, model,
                                          mask=sample.mask_V, shading=aux.shading)
            sel = result.valid & sample.mask_V & ~result.low_confidence
            return np.sqrt(np.mean((result.reflectance[sel] - refl.values) ** 2))
        exact = run(sample.disparity_gt)
        perturbed = run(sample.disparity_gt + 2.0)
        assert perturbed > exact

    def test_all_shadow_mask_gives_invalid(self, span_scene_sample, system_matrix,
                                           model, desk_pattern):
        sample, aux, _ = span_scene_sample
        result = cd.reconstruct_image(sample.image_I.astype(np.float64),
                                      sample.disparity_gt, desk_pattern,
                                      system_matrix, model,
                                      mask=np.zeros_like(sample.mask_V),
                                      shading=aux.shading)
        assert not np.any(result.valid)
        assert np.all(np.isnan(result.reflectance))
