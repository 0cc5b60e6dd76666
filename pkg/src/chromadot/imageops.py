"""Pixel-level operators shared by the losses and the reconstruction paths.

Images are plain numpy arrays of shape (H, W) or (H, W, C); invalid pixels
are NaN.  Coordinates follow image convention: ``u`` indexes columns
(axis 1), ``v`` indexes rows (axis 0).  All border handling uses replicate
padding; disparity warps are horizontal-only (rectified geometry).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

LCN_WINDOW = 11
LCN_ETA = 1e-4
CENSUS_WINDOW = 7
# Census saturation scale, matched to LCN output magnitudes: label-driven
# LCN contrasts (|x| ~ 2) mostly saturate phi while same-label residue
# (|x| << 1) stays in the linear regime instead of flipping to +/-1.
CENSUS_EPS = 1.0

SOBEL_H = np.array([[-1.0, 0.0, 1.0],
                    [-2.0, 0.0, 2.0],
                    [-1.0, 0.0, 1.0]])
SOBEL_V = SOBEL_H.T


def _as_3d(img: np.ndarray) -> tuple[np.ndarray, bool]:
    img = np.asarray(img)
    if img.ndim == 2:
        return img[:, :, None], True
    if img.ndim == 3:
        return img, False
    raise ValueError(f"expected (H, W) or (H, W, C) image, got shape {img.shape}")


def lcn(img: np.ndarray, window: int = LCN_WINDOW, eta: float = LCN_ETA) -> np.ndarray:
    """Local contrast normalization: ``(I - mu) / (sigma + eta)`` per channel.

    ``mu`` and ``sigma`` are the mean and (population) standard deviation
    over the ``window x window`` neighborhood of each pixel, computed with
    replicate padding at the borders.
    """
    if window % 2 == 0 or window < 3:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if eta <= 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    x, squeeze = _as_3d(np.asarray(img, dtype=np.float64))
    size = (window, window, 1)
    mu = ndimage.uniform_filter(x, size=size, mode="nearest")
    sq = ndimage.uniform_filter(x * x, size=size, mode="nearest")
    var = np.maximum(sq - mu * mu, 0.0)
    out = (x - mu) / (np.sqrt(var) + eta)
    return out[:, :, 0] if squeeze else out


def warp_by_disparity(field: np.ndarray, disparity: np.ndarray) -> np.ndarray:
    """Sample ``field`` at ``(u - D(u,v), v)`` with bilinear interpolation in u.

    Source coordinates outside [0, W-1] (and non-finite disparities) yield
    NaN output pixels.  Integer disparities reproduce the source values
    bit-exactly.
    """
    x, squeeze = _as_3d(np.asarray(field, dtype=np.float64))
    d = np.asarray(disparity, dtype=np.float64)
    h, w, _ = x.shape
    if d.shape != (h, w):
        raise ValueError(f"disparity shape {d.shape} != field spatial shape {(h, w)}")

    src = np.arange(w, dtype=np.float64)[None, :] - d
    valid = np.isfinite(src) & (src >= 0.0) & (src <= w - 1.0)
    src_safe = np.where(valid, src, 0.0)
    u0 = np.floor(src_safe).astype(np.intp)
    frac = src_safe - u0
    u1 = np.minimum(u0 + 1, w - 1)

    rows = np.arange(h, dtype=np.intp)[:, None]
    lo = x[rows, u0]
    hi = x[rows, u1]
    # frac == 0 short-circuits so weight-0 neighbors (possibly NaN) cannot leak in
    out = np.where(frac[..., None] > 0.0, lo + frac[..., None] * (hi - lo), lo)
    out[~valid] = np.nan
    return out[:, :, 0] if squeeze else out


def sobel_gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel responses per channel: ``(vertical, horizontal)``.

    Horizontal means the derivative along u (columns); replicate padding.
    Evaluated as grouped neighbor differences so constant regions yield
    exact zeros and transposing the image exactly swaps the two outputs.
    """
    x, squeeze = _as_3d(np.asarray(img, dtype=np.float64))
    h, w, _ = x.shape
    if h < 3 or w < 3:
        raise ValueError(f"image must be at least 3x3, got {x.shape[:2]}")
    p = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    nw, n_, ne = p[:h, :w], p[:h, 1:w + 1], p[:h, 2:]
    w_, e_ = p[1:h + 1, :w], p[1:h + 1, 2:]
    sw, s_, se = p[2:, :w], p[2:, 1:w + 1], p[2:, 2:]
    grad_h = (ne - nw) + 2.0 * (e_ - w_) + (se - sw)
    grad_v = (sw - nw) + 2.0 * (s_ - n_) + (se - ne)
    if squeeze:
        return grad_v[:, :, 0], grad_h[:, :, 0]
    return grad_v, grad_h


def census_phi(x: np.ndarray, eps: float = CENSUS_EPS) -> np.ndarray:
    """Saturating odd comparison function ``x / sqrt(x^2 + eps^2)``."""
    return x / np.sqrt(x * x + eps * eps)


def smooth_census_distance(a: np.ndarray, b: np.ndarray, window: int = CENSUS_WINDOW,
                           eps: float = CENSUS_EPS) -> np.ndarray:
    """Differentiable Census descriptor distance between two images.

    Per pixel p the distance is the mean over window offsets q != 0 and
    channels of ``|phi(A(p+q) - A(p)) - phi(B(p+q) - B(p))| / 2`` with the
    saturating ``phi`` above, giving values in [0, 1].  Windows touching a
    NaN pixel produce NaN (callers drop those from their averages).
    """
    if window % 2 == 0 or window < 3:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    xa, _ = _as_3d(np.asarray(a, dtype=np.float64))
    xb, _ = _as_3d(np.asarray(b, dtype=np.float64))
    if xa.shape != xb.shape:
        raise ValueError(f"image shapes differ: {xa.shape} vs {xb.shape}")
    r = window // 2
    pa = np.pad(xa, ((r, r), (r, r), (0, 0)), mode="edge")
    pb = np.pad(xb, ((r, r), (r, r), (0, 0)), mode="edge")
    h, w, ch = xa.shape
    acc = np.zeros((h, w), dtype=np.float64)
    count = 0
    for dv in range(window):
        for du in range(window):
            if dv == r and du == r:
                continue
            da = pa[dv:dv + h, du:du + w] - xa
            db = pb[dv:dv + h, du:du + w] - xb
            acc += np.sum(np.abs(census_phi(da, eps) - census_phi(db, eps)), axis=2)
            count += ch
    return acc / (2.0 * count)


def shadow_binarize(img: np.ndarray, threshold: float) -> np.ndarray:
    """Boolean mask: max-channel intensity strictly above ``threshold``."""
    if threshold < 0.0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    x, _ = _as_3d(np.asarray(img, dtype=np.float64))
    return np.max(x, axis=2) > threshold


# ---------------------------------------------------------------------------
# Adjoint of the replicate-padded 3x3 correlation, used by analytic loss
# gradients.  Forward: pad 1px (edge) then valid correlation; the adjoint is
# the full convolution followed by folding the padded border back into its
# source pixels.
# ---------------------------------------------------------------------------

def correlate3x3_adjoint(grad_out: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    g = np.asarray(grad_out, dtype=np.float64)
    full = ndimage.convolve(np.pad(g, 1), kernel, mode="constant", cval=0.0)
    folded = full[1:-1, 1:-1].copy()
    folded[0, :] += full[0, 1:-1]
    folded[-1, :] += full[-1, 1:-1]
    folded[:, 0] += full[1:-1, 0]
    folded[:, -1] += full[1:-1, -1]
    folded[0, 0] += full[0, 0]
    folded[0, -1] += full[0, -1]
    folded[-1, 0] += full[-1, 0]
    folded[-1, -1] += full[-1, -1]
    return folded
