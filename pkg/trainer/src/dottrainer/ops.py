"""Differentiable image operators, mirroring the renderer's loss kernels.

Conventions shared with the reference implementation (required for loss
parity): replicate border padding, population statistics in LCN,
horizontal-only bilinear warping with `lo + frac * (hi - lo)` and the
frac > 0 short-circuit, grouped-difference Sobel kernels, and the smooth
Census phi(x) = x / sqrt(x^2 + eps^2) with eps matched to LCN contrast.

Validity is tracked with explicit masks instead of NaNs so gradients stay
finite during training; a pixel's Census window is valid only if every
pixel in it is valid, which reproduces the reference NaN-poisoning rule.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

LCN_WINDOW = 11
LCN_ETA = 1e-4
CENSUS_WINDOW = 7
CENSUS_EPS = 1.0


def lcn(img: torch.Tensor, window: int = LCN_WINDOW, eta: float = LCN_ETA) -> torch.Tensor:
    """Local contrast normalization of a (B, C, H, W) image."""
    r = window // 2
    padded = F.pad(img, (r, r, r, r), mode="replicate")
    mu = F.avg_pool2d(padded, window, stride=1)
    sq = F.avg_pool2d(padded * padded, window, stride=1)
    var = torch.clamp(sq - mu * mu, min=0.0)
    return (img - mu) / (torch.sqrt(var) + eta)


def warp_by_disparity(field: torch.Tensor, disparity: torch.Tensor
                      ) -> tuple[torch.Tensor, torch.Tensor]:
    """Sample ``field`` at u - D with bilinear interpolation along u.

    field: (B, C, H, W); disparity: (B, H, W).  Returns (warped, valid)
    where invalid (out-of-range source) pixels are zero-filled.
    """
    b, c, h, w = field.shape
    u = torch.arange(w, dtype=field.dtype, device=field.device)
    src = u.view(1, 1, w) - disparity
    valid = (src >= 0.0) & (src <= w - 1.0)
    src_safe = torch.where(valid, src, torch.zeros_like(src))
    u0 = torch.floor(src_safe)
    frac = (src_safe - u0).unsqueeze(1)
    idx0 = u0.long().clamp(0, w - 1)
    idx1 = (idx0 + 1).clamp(0, w - 1)
    lo = torch.gather(field, 3, idx0.unsqueeze(1).expand(b, c, h, w))
    hi = torch.gather(field, 3, idx1.unsqueeze(1).expand(b, c, h, w))
    warped = torch.where(frac > 0.0, lo + frac * (hi - lo), lo)
    warped = warped * valid.unsqueeze(1)
    return warped, valid


def sobel_gradients(img: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Grouped-difference 3x3 Sobel responses, (vertical, horizontal)."""
    p = F.pad(img, (1, 1, 1, 1), mode="replicate")
    nw, n_, ne = p[..., :-2, :-2], p[..., :-2, 1:-1], p[..., :-2, 2:]
    w_, e_ = p[..., 1:-1, :-2], p[..., 1:-1, 2:]
    sw, s_, se = p[..., 2:, :-2], p[..., 2:, 1:-1], p[..., 2:, 2:]
    grad_h = (ne - nw) + 2.0 * (e_ - w_) + (se - sw)
    grad_v = (sw - nw) + 2.0 * (s_ - n_) + (se - ne)
    return grad_v, grad_h


def census_phi(x: torch.Tensor, eps: float = CENSUS_EPS) -> torch.Tensor:
    return x / torch.sqrt(x * x + eps * eps)


def _neighborhoods(x: torch.Tensor, window: int) -> torch.Tensor:
    """(B, C, window^2, H, W) replicate-padded sliding windows."""
    b, c, h, w = x.shape
    r = window // 2
    padded = F.pad(x, (r, r, r, r), mode="replicate")
    cols = F.unfold(padded, window)
    return cols.view(b, c, window * window, h, w)


def smooth_census_distance(a: torch.Tensor, b: torch.Tensor,
                           window: int = CENSUS_WINDOW,
                           eps: float = CENSUS_EPS) -> torch.Tensor:
    """Per-pixel smooth Census distance of (B, C, H, W) images -> (B, H, W).

    All window offsets are materialized at once (unfold); the center offset
    contributes an exact zero, so the mean simply excludes it from the
    count.
    """
    c = a.shape[1]
    da = _neighborhoods(a, window) - a.unsqueeze(2)
    db = _neighborhoods(b, window) - b.unsqueeze(2)
    diff = torch.abs(census_phi(da, eps) - census_phi(db, eps))
    count = c * (window * window - 1)
    return diff.sum(dim=(1, 2)) / (2.0 * count)


def erode_mask(mask: torch.Tensor, window: int) -> torch.Tensor:
    """True where every pixel of the window is true ((B, H, W) bool)."""
    r = window // 2
    inv = F.pad((~mask).float().unsqueeze(1), (r, r, r, r), mode="replicate")
    grown = F.max_pool2d(inv, window, stride=1).squeeze(1)
    return grown == 0.0
