import numpy as np
import pytest
import torch

from dottrainer import ops
from dottrainer.losses import LossWeights, loss_pattern, total_loss
from dottrainer.model import build_networks
from dottrainer.records import load_dataset
from dottrainer.train import Pipeline, batch_from_samples

SLIM = (4, 6, 8, 8, 12, 12, 16, 16)


class TestOps:
    def test_lcn_constant_is_zero(self):
        img = torch.full((1, 3, 20, 24), 5.0)
        assert torch.equal(ops.lcn(img), torch.zeros_like(img))

    def test_warp_identity(self):
        torch.manual_seed(0)
        field = torch.randn(1, 3, 10, 30)
        warped, valid = ops.warp_by_disparity(field, torch.zeros(1, 10, 30))
        assert torch.equal(warped, field)
        assert valid.all()

    def test_warp_integer_shift(self):
        field = torch.arange(20.0).view(1, 1, 1, 20).expand(1, 1, 4, 20).clone()
        warped, valid = ops.warp_by_disparity(field, torch.full((1, 4, 20), 3.0))
        assert torch.equal(warped[..., 3:], field[..., :17])
        assert not valid[..., :3].any()

    def test_census_equal_images(self):
        torch.manual_seed(1)
        img = torch.randn(1, 3, 9, 9)
        assert torch.equal(ops.smooth_census_distance(img, img),
                           torch.zeros(1, 9, 9))

    def test_erode_mask(self):
        mask = torch.ones(1, 5, 5, dtype=torch.bool)
        mask[0, 2, 2] = False
        eroded = ops.erode_mask(mask, 3)
        assert not eroded[0, 1:4, 1:4].any()
        assert eroded[0, 0, 0]

    def test_sobel_matches_reference_formula(self):
        torch.manual_seed(2)
        x = torch.randn(1, 1, 8, 11, dtype=torch.float64)
        gv, gh = ops.sobel_gradients(x)
        img = x[0, 0].numpy()
        padded = np.pad(img, 1, mode="edge")
        kh = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
        expect_h = np.zeros_like(img)
        for v in range(img.shape[0]):
            for u in range(img.shape[1]):
                expect_h[v, u] = np.sum(padded[v:v + 3, u:u + 3] * kh)
        np.testing.assert_allclose(gh[0, 0].numpy(), expect_h, atol=1e-12)


class TestGradients:
    def test_pattern_loss_gradient_through_warp(self, flat_dataset_dir):
        # central differences vs float32 autograd at 50 random pixels.
        # The loss is differentiable only almost everywhere (abs() kinks in
        # the Census sum, bilinear kinks in the warp), so the oracle
        # (a) evaluates the loss on a window around the checked pixel (same
        #     autograd path, larger per-pixel gradient),
        # (b) keeps the disparity half a pixel away from the warp kinks,
        # (c) accumulates the float32 per-pixel distances in float64 so the
        #     unchanged pixels cancel exactly in the difference, and
        # (d) skips points whose forward/backward slopes disagree (a kink
        #     inside the +/-h interval, where a central difference is
        #     meaningless).
        dataset = load_dataset(flat_dataset_dir)
        batch = batch_from_samples([dataset.samples[0]])
        i_lcn = ops.lcn(batch.image)
        pm = torch.from_numpy(dataset.pattern_pm()).unsqueeze(0)
        d = torch.floor(batch.disparity) + 0.5

        def loss_acc64(d_map, mask):
            warped, warp_valid = ops.warp_by_disparity(pm, d_map)
            dist = ops.smooth_census_distance(i_lcn, warped)
            eff = mask & ops.erode_mask(warp_valid, ops.CENSUS_WINDOW)
            return float((dist.double() * eff).sum() / eff.sum())

        h = 1e-3
        rng = np.random.default_rng(0)
        checked = 0
        worst = 0.0
        for v, u in zip(rng.integers(16, 104, 50), rng.integers(32, 144, 50)):
            crop = torch.zeros_like(batch.valid)
            crop[0, v - 12:v + 12, u - 12:u + 12] = True
            mask = batch.valid & crop
            d_var = d.clone().requires_grad_(True)
            loss_pattern(i_lcn, pm, d_var, mask).backward()
            ana = float(d_var.grad[0, v, u])
            if abs(ana) < 1e-5:
                continue
            deltas = {}
            for delta in (0.0, h, -h):
                bumped = d.clone()
                bumped[0, v, u] += delta
                with torch.no_grad():
                    deltas[delta] = loss_acc64(bumped, mask)
            fwd = (deltas[h] - deltas[0.0]) / h
            bwd = (deltas[0.0] - deltas[-h]) / h
            if abs(fwd - bwd) > 0.02 * max(abs(fwd), abs(bwd)):
                continue
            num = (deltas[h] - deltas[-h]) / (2 * h)
            worst = max(worst, abs(num - ana) / max(abs(num), abs(ana)))
            checked += 1
        assert checked >= 20
        assert worst < 1e-2

    def test_reflectance_loss_couples_into_disparity_net(self, flat_dataset_dir):
        # gradients of the spectral losses must reach the disparity network
        # through the depth input and the differentiable warp
        torch.manual_seed(0)
        dataset = load_dataset(flat_dataset_dir)
        pipeline = Pipeline(dataset, widths=SLIM)
        batch = batch_from_samples([dataset.samples[0]])
        d_hat, z_hat, warped, r_hat = pipeline.forward(batch.image)
        l_r = torch.sum((r_hat - batch.reflectance) ** 2 * batch.valid.unsqueeze(1))
        l_r.backward()
        norms = [p.grad.norm() for p in pipeline.disparity_net.parameters()
                 if p.grad is not None]
        assert norms and float(torch.stack(norms).sum()) > 0.0

    def test_forward_pipeline_shapes_and_ranges(self, flat_dataset_dir):
        torch.manual_seed(0)
        dataset = load_dataset(flat_dataset_dir)
        pipeline = Pipeline(dataset, widths=SLIM)
        batch = batch_from_samples(dataset.samples[:2])
        with torch.no_grad():
            d_hat, z_hat, warped, r_hat = pipeline.forward(batch.image)
        assert d_hat.shape == (2, 120, 160)
        assert r_hat.shape == (2, 27, 120, 160)
        assert float(d_hat.min()) >= 0.5
        assert float(d_hat.max()) <= dataset.max_disparity
        assert float(r_hat.min()) >= 0.0 and float(r_hat.max()) <= 1.0
        # depth conversion consistency: Z * D == b*f elementwise
        bf = dataset.rig["baseline_m"] * dataset.rig["focal_px"]
        torch.testing.assert_close(z_hat * d_hat, torch.full_like(z_hat, bf))

    def test_warp_layer_zero_disparity_is_identity(self, flat_dataset_dir):
        dataset = load_dataset(flat_dataset_dir)
        cube = torch.from_numpy(dataset.illumination_cube()).unsqueeze(0)
        warped, valid = ops.warp_by_disparity(cube, torch.zeros(1, 120, 160))
        assert torch.equal(warped, cube)
        assert valid.all()
