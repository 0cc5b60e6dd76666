"""Training losses, numerically mirroring the renderer's loss kernels.

All terms are means over the valid-pixel set; band-resolved terms sum over
bands first; the total is l_d + w_de*l_de + w_p*l_p + w_r*l_r + w_re*l_re.
Given identical inputs these reproduce the reference values to floating-
point accuracy (checked against the renderer CLI in the parity test).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from . import ops


@dataclass(frozen=True)
class LossWeights:
    w_de: float = 100.0
    w_p: float = 0.2
    w_r: float = 1.0
    w_re: float = 8.0


def _masked_mean(per_pixel: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    count = mask.sum()
    if count == 0:
        raise ValueError("no valid pixels in mask")
    return (per_pixel * mask).sum() / count


def loss_disparity(d_hat: torch.Tensor, d_gt: torch.Tensor,
                   valid: torch.Tensor) -> torch.Tensor:
    return _masked_mean((d_hat - d_gt) ** 2, valid)


def loss_reflectance(r_hat: torch.Tensor, r_gt: torch.Tensor,
                     valid: torch.Tensor) -> torch.Tensor:
    per_pixel = torch.sum((r_hat - r_gt) ** 2, dim=1)
    return _masked_mean(per_pixel, valid)


def loss_edges(x_hat: torch.Tensor, x_gt: torch.Tensor, valid: torch.Tensor,
               finite: torch.Tensor | None = None) -> torch.Tensor:
    """Squared Sobel-gradient differences over the valid set.

    ``finite`` marks where the (zero-filled) ground truth was actually
    defined; pixels whose 3x3 window touches an undefined one are dropped,
    matching the reference NaN-propagation rule.  The default (None) means
    the ground truth is defined everywhere.
    """
    gv_h, gh_h = ops.sobel_gradients(x_hat)
    gv_g, gh_g = ops.sobel_gradients(x_gt)
    per_pixel = torch.sum((gv_h - gv_g) ** 2 + (gh_h - gh_g) ** 2, dim=1)
    eff = valid if finite is None else valid & ops.erode_mask(finite, 3)
    return _masked_mean(per_pixel, eff)


def loss_pattern(i_lcn: torch.Tensor, pattern_pm: torch.Tensor,
                 d_hat: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
    """Census distance between the LCN image and the warped +/-1 pattern."""
    warped, warp_valid = ops.warp_by_disparity(pattern_pm, d_hat)
    dist = ops.smooth_census_distance(i_lcn, warped)
    eff = valid & ops.erode_mask(warp_valid, ops.CENSUS_WINDOW)
    return _masked_mean(dist, eff)


@dataclass
class LossReport:
    l_d: torch.Tensor
    l_de: torch.Tensor
    l_p: torch.Tensor
    l_r: torch.Tensor
    l_re: torch.Tensor
    total: torch.Tensor

    def detached(self) -> dict:
        return {k: float(getattr(self, k).detach())
                for k in ("l_d", "l_de", "l_p", "l_r", "l_re", "total")}


def total_loss(d_hat, r_hat, i_lcn, pattern_pm, d_gt, r_gt, valid,
               weights: LossWeights = LossWeights(),
               finite_disparity: torch.Tensor | None = None) -> LossReport:
    l_d = loss_disparity(d_hat, d_gt, valid)
    l_de = loss_edges(d_hat.unsqueeze(1), d_gt.unsqueeze(1), valid,
                      finite=finite_disparity)
    l_p = loss_pattern(i_lcn, pattern_pm, d_hat, valid)
    l_r = loss_reflectance(r_hat, r_gt, valid)
    l_re = loss_edges(r_hat, r_gt, valid)
    total = (l_d + weights.w_de * l_de + weights.w_p * l_p
             + weights.w_r * l_r + weights.w_re * l_re)
    return LossReport(l_d=l_d, l_de=l_de, l_p=l_p, l_r=l_r, l_re=l_re, total=total)
