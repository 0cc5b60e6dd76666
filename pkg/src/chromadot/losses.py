"""The five training loss terms and their masked weighted total.

Conventions, used identically by every term (and mirrored by any trainer
that wants loss parity):

* every per-pixel sum is a MEAN over the valid-pixel set V, which makes
  the weights resolution-independent;
* reflectance-like terms sum over bands before the pixel mean;
* pixels whose term value is non-finite (NaN ground truth, invalid warp
  source, Census window touching an invalid pixel) are dropped from the
  mean;
* the total is ``l_d + w_de*l_de + w_p*l_p + w_r*l_r + w_re*l_re``.

MSE and edge terms come with analytic gradients; a central-difference
checker validates them (and gradients through the warp) at random
coordinates.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import imageops
from .pattern import generate_pattern
from .render import Sample


class EmptyMaskError(ValueError):
    """A loss was evaluated with no valid pixels."""


@dataclass(frozen=True)
class LossWeights:
    """Balance coefficients of the total loss."""

    w_de: float = 100.0
    w_p: float = 0.2
    w_r: float = 1.0
    w_re: float = 8.0

    def __post_init__(self):
        if min(self.w_de, self.w_p, self.w_r, self.w_re) < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass(frozen=True)
class LossReport:
    l_d: float
    l_de: float
    l_p: float
    l_r: float
    l_re: float
    total: float
    valid_pixel_count: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LossReport":
        return cls(**{k: d[k] for k in
                      ("l_d", "l_de", "l_p", "l_r", "l_re", "total", "valid_pixel_count")})


def _checked_mask(mask: np.ndarray, *arrays: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    for a in arrays:
        if a.shape[:2] != mask.shape:
            raise ValueError(f"shape {a.shape} does not match mask {mask.shape}")
    if not np.any(mask):
        raise EmptyMaskError("no valid pixels in mask")
    return mask


def loss_disparity(d_hat: np.ndarray, d_gt: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared disparity error over the valid set."""
    d_hat = np.asarray(d_hat, dtype=np.float64)
    d_gt = np.asarray(d_gt, dtype=np.float64)
    mask = _checked_mask(mask, d_hat, d_gt)
    err = (d_hat - d_gt) ** 2
    eff = mask & np.isfinite(err)
    if not np.any(eff):
        raise EmptyMaskError("no finite disparity errors in mask")
    return float(np.mean(err[eff]))


def grad_loss_disparity(d_hat, d_gt, mask) -> np.ndarray:
    d_hat = np.asarray(d_hat, dtype=np.float64)
    d_gt = np.asarray(d_gt, dtype=np.float64)
    mask = _checked_mask(mask, d_hat, d_gt)
    err = d_hat - d_gt
    eff = mask & np.isfinite(err)
    g = np.zeros_like(d_hat)
    g[eff] = 2.0 * err[eff] / np.count_nonzero(eff)
    return g


def loss_reflectance(r_hat: np.ndarray, r_gt: np.ndarray, mask: np.ndarray) -> float:
    """Per-band squared errors summed over bands, averaged over valid pixels."""
    r_hat = np.asarray(r_hat, dtype=np.float64)
    r_gt = np.asarray(r_gt, dtype=np.float64)
    mask = _checked_mask(mask, r_hat, r_gt)
    per_pixel = np.sum((r_hat - r_gt) ** 2, axis=2)
    eff = mask & np.isfinite(per_pixel)
    if not np.any(eff):
        raise EmptyMaskError("no finite reflectance errors in mask")
    return float(np.mean(per_pixel[eff]))


def grad_loss_reflectance(r_hat, r_gt, mask) -> np.ndarray:
    r_hat = np.asarray(r_hat, dtype=np.float64)
    r_gt = np.asarray(r_gt, dtype=np.float64)
    mask = _checked_mask(mask, r_hat, r_gt)
    err = r_hat - r_gt
    eff = mask & np.all(np.isfinite(err), axis=2)
    g = np.zeros_like(r_hat)
    g[eff] = 2.0 * err[eff] / np.count_nonzero(eff)
    return g


def loss_edges(x_hat: np.ndarray, x_gt: np.ndarray, mask: np.ndarray) -> float:
    """Squared Sobel-gradient differences (vertical + horizontal, band-summed)."""
    gv_h, gh_h = imageops.sobel_gradients(np.asarray(x_hat, dtype=np.float64))
    gv_g, gh_g = imageops.sobel_gradients(np.asarray(x_gt, dtype=np.float64))
    diff = (gv_h - gv_g) ** 2 + (gh_h - gh_g) ** 2
    if diff.ndim == 3:
        diff = np.sum(diff, axis=2)
    mask = _checked_mask(mask, diff)
    eff = mask & np.isfinite(diff)
    if not np.any(eff):
        raise EmptyMaskError("no finite edge errors in mask")
    return float(np.mean(diff[eff]))


def grad_loss_edges(x_hat, x_gt, mask) -> np.ndarray:
    """Analytic gradient of :func:`loss_edges` wrt the prediction."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_gt = np.asarray(x_gt, dtype=np.float64)
    squeeze = x_hat.ndim == 2
    xh = x_hat[:, :, None] if squeeze else x_hat
    xg = x_gt[:, :, None] if squeeze else x_gt
    gv_h, gh_h = imageops.sobel_gradients(xh)
    gv_g, gh_g = imageops.sobel_gradients(xg)
    dv = gv_h - gv_g
    dh = gh_h - gh_g
    per_pixel = np.sum(dv * dv + dh * dh, axis=2)
    mask = _checked_mask(mask, per_pixel)
    eff = mask & np.isfinite(per_pixel)
    scale = 2.0 / np.count_nonzero(eff)
    g = np.zeros_like(xh)
    sel = eff.astype(np.float64)
    for c in range(xh.shape[2]):
        g[:, :, c] = scale * (
            imageops.correlate3x3_adjoint(sel * dv[:, :, c], imageops.SOBEL_V)
            + imageops.correlate3x3_adjoint(sel * dh[:, :, c], imageops.SOBEL_H))
    return g[:, :, 0] if squeeze else g


def loss_pattern(i_lcn: np.ndarray, pattern_pm: np.ndarray, d_hat: np.ndarray,
                 mask: np.ndarray, *, window: int = imageops.CENSUS_WINDOW,
                 eps: float = imageops.CENSUS_EPS) -> float:
    """Smooth-Census distance between the LCN image and the warped pattern.

    ``pattern_pm`` is the +/-1 coded reference pattern; it is warped to the
    camera view by ``d_hat`` with bilinear resampling, then compared per
    pixel; warp-invalid and Census-invalid pixels are dropped.
    """
    warped = imageops.warp_by_disparity(np.asarray(pattern_pm, dtype=np.float64),
                                        np.asarray(d_hat, dtype=np.float64))
    dist = imageops.smooth_census_distance(np.asarray(i_lcn, dtype=np.float64),
                                           warped, window=window, eps=eps)
    mask = _checked_mask(mask, dist)
    eff = mask & np.isfinite(dist)
    if not np.any(eff):
        raise EmptyMaskError("no valid pixels after warping")
    return float(np.mean(dist[eff]))


def warp_mse(field: np.ndarray, d: np.ndarray, target: np.ndarray,
             mask: np.ndarray) -> float:
    """Channel-summed MSE between ``warp(field, d)`` and ``target`` over V.

    The simplest loss that is differentiable *through* the warp; used to
    validate warp gradients.
    """
    warped = imageops.warp_by_disparity(np.asarray(field, dtype=np.float64),
                                        np.asarray(d, dtype=np.float64))
    diff = warped - np.asarray(target, dtype=np.float64)
    per_pixel = diff * diff
    if per_pixel.ndim == 3:
        per_pixel = np.sum(per_pixel, axis=2)
    mask = _checked_mask(mask, per_pixel)
    eff = mask & np.isfinite(per_pixel)
    if not np.any(eff):
        raise EmptyMaskError("no valid warped pixels in mask")
    return float(np.mean(per_pixel[eff]))


def grad_warp_mse_wrt_disparity(field, d, target, mask) -> np.ndarray:
    """Analytic gradient of :func:`warp_mse` wrt the disparity map.

    With ``out = a + frac * (b - a)`` the warp's derivative wrt the source
    coordinate is ``b - a``, and the source moves as ``-d``.
    """
    x = np.asarray(field, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    d = np.asarray(d, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if t.ndim == 2:
        t = t[:, :, None]
    h, w, _ = x.shape
    src = np.arange(w, dtype=np.float64)[None, :] - d
    valid = np.isfinite(src) & (src >= 0.0) & (src <= w - 1.0)
    src_safe = np.where(valid, src, 0.0)
    u0 = np.floor(src_safe).astype(np.intp)
    frac = src_safe - u0
    u1 = np.minimum(u0 + 1, w - 1)
    rows = np.arange(h, dtype=np.intp)[:, None]
    lo = x[rows, u0]
    hi = x[rows, u1]
    warped = np.where(frac[..., None] > 0.0, lo + frac[..., None] * (hi - lo), lo)
    warped[~valid] = np.nan
    diff = warped - t
    per_pixel = np.sum(diff * diff, axis=2)
    mask = _checked_mask(mask, per_pixel)
    eff = mask & np.isfinite(per_pixel)
    g = np.zeros_like(d)
    scale = 2.0 / np.count_nonzero(eff)
    dout_dd = -(hi - lo)  # d src / d D = -1
    contrib = scale * np.sum(diff * dout_dd, axis=2)
    g[eff] = contrib[eff]
    return g


def pattern_loss_mask(mask: np.ndarray, d_hat: np.ndarray, width: int) -> np.ndarray:
    """The effective pixel set of the pattern loss: V restricted to valid warps."""
    d = np.asarray(d_hat, dtype=np.float64)
    src = np.arange(width, dtype=np.float64)[None, :] - d
    return np.asarray(mask, dtype=bool) & np.isfinite(src) & (src >= 0) & (src <= width - 1)


def combine_terms(l_d: float, l_de: float, l_p: float, l_r: float, l_re: float,
                  weights: LossWeights) -> float:
    """The weighted sum that defines the total loss."""
    return (l_d + weights.w_de * l_de + weights.w_p * l_p
            + weights.w_r * l_r + weights.w_re * l_re)


def total_loss(sample: Sample, d_hat: np.ndarray, r_hat: np.ndarray,
               weights: LossWeights = LossWeights()) -> LossReport:
    """Assemble the five terms on the sample's shadow mask."""
    mask = sample.mask_V & np.isfinite(sample.disparity_gt)
    if not np.any(mask):
        raise EmptyMaskError("sample has no valid pixels")
    pattern = generate_pattern(sample.meta.pattern_width, sample.meta.pattern_height,
                               sample.meta.pattern_seed)
    i_lcn = imageops.lcn(sample.image_I.astype(np.float64))
    l_d = loss_disparity(d_hat, sample.disparity_gt, mask)
    l_de = loss_edges(d_hat, sample.disparity_gt, mask)
    l_p = loss_pattern(i_lcn, pattern.pm_image(), d_hat, mask)
    l_r = loss_reflectance(r_hat, sample.reflectance_gt, mask)
    l_re = loss_edges(r_hat, sample.reflectance_gt, mask)
    return LossReport(l_d=l_d, l_de=l_de, l_p=l_p, l_r=l_r, l_re=l_re,
                      total=combine_terms(l_d, l_de, l_p, l_r, l_re, weights),
                      valid_pixel_count=int(np.count_nonzero(mask)))


def numeric_gradient_check(loss_fn, param: np.ndarray, analytic: np.ndarray,
                           *, step: float = 1e-4, points: int = 100,
                           seed: int = 0) -> float:
    """Worst relative error between central differences and ``analytic``.

    ``loss_fn`` maps a parameter image to a scalar; coordinates are sampled
    uniformly among finite entries.  Coordinates where both gradients are
    below 1e-12 count as error 0.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    param = np.asarray(param, dtype=np.float64)
    base = loss_fn(param)
    if not np.isfinite(base):
        raise ValueError("loss is not finite at the evaluation point")
    flat_ok = np.flatnonzero(np.isfinite(param.reshape(-1)))
    rng = np.random.default_rng(seed)
    coords = rng.choice(flat_ok, size=min(points, len(flat_ok)), replace=False)
    worst = 0.0
    for flat in coords:
        idx = np.unravel_index(flat, param.shape)
        bumped = param.copy()
        bumped[idx] = param[idx] + step
        up = loss_fn(bumped)
        bumped[idx] = param[idx] - step
        down = loss_fn(bumped)
        num = (up - down) / (2.0 * step)
        ana = float(np.asarray(analytic)[idx])
        denom = max(abs(num), abs(ana))
        if denom < 1e-12:
            continue
        worst = max(worst, abs(num - ana) / denom)
    return worst
