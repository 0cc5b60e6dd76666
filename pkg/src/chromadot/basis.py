"""Classical linear-inverse spectral reconstruction and conditioning analysis.

A 3x3 dot neighborhood observes each surface patch under (up to) three
distinct illuminations through three camera channels, i.e. nine effective
spectral measurements.  The system matrix M stacks the nine per-band
products sensitivity x primary; reconstruction solves the regularized
least-squares problem for coefficients of a low-dimensional reflectance
basis, optionally stabilized by a band-smoothness penalty.

Raw inversion is severely ill-posed (condition number far above 100 for
the default spectra); restricting to a PCA basis plus smoothness brings
the conditioning down by orders of magnitude, which is what makes the
nine-band window reconstruction workable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imageops import warp_by_disparity
from .pattern import DotPattern
from .spectral import (
    CameraSensitivity,
    GridMismatchError,
    ProjectorPrimaries,
    Spectrum,
    WavelengthGrid,
)

DEFAULT_SMOOTHNESS_WEIGHT = 1e-2
DEFAULT_BASIS_SIZE = 8


def build_system_matrix(c: CameraSensitivity, primaries: ProjectorPrimaries) -> np.ndarray:
    """The (9, N_lambda) operator with row (i, n) = c_n * l_i elementwise.

    Rows are ordered illumination-major: (R-illum x RGB), (G-illum x RGB),
    (B-illum x RGB).  ``M @ r`` reproduces the unshaded camera responses.
    """
    if c.grid != primaries.grid:
        raise GridMismatchError("sensitivity and primaries must share a grid")
    prim = primaries.as_matrix()
    rows = [c.channels[n] * prim[i] for i in range(3) for n in range(3)]
    return np.stack(rows)


def condition_number(m: np.ndarray) -> float:
    """Ratio of largest to smallest nonzero singular value."""
    m = np.asarray(m, dtype=np.float64)
    if not np.any(m != 0.0):
        raise ValueError("condition number of an all-zero matrix is undefined")
    s = np.linalg.svd(m, compute_uv=False)
    tol = max(m.shape) * np.finfo(np.float64).eps * s[0]
    nonzero = s[s > tol]
    return float(nonzero[0] / nonzero[-1])


def second_difference_operator(band_count: int) -> np.ndarray:
    """(N-2, N) matrix of second-order finite differences over bands."""
    n = band_count
    s = np.zeros((n - 2, n))
    for i in range(n - 2):
        s[i, i:i + 3] = (1.0, -2.0, 1.0)
    return s


@dataclass(frozen=True, eq=False)
class BasisModel:
    """Affine reflectance model: r = mean + basis @ coefficients."""

    basis: np.ndarray   # (N_lambda, K), orthonormal columns
    mean: Spectrum
    smoothness: np.ndarray  # (N_lambda - 2, N_lambda)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=np.float64)
        n = self.mean.grid.band_count
        if b.shape[0] != n or b.shape[1] > n:
            raise ValueError(f"basis shape {b.shape} invalid for {n} bands")
        gram = b.T @ b
        if not np.allclose(gram, np.eye(b.shape[1]), atol=1e-8):
            raise ValueError("basis columns must be orthonormal")
        object.__setattr__(self, "basis", b)

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def grid(self) -> WavelengthGrid:
        return self.mean.grid


def fit_basis(corpus: list[Spectrum], k: int = DEFAULT_BASIS_SIZE) -> BasisModel:
    """PCA of a reflectance corpus: mean plus the top-k principal directions."""
    if len(corpus) <= k:
        raise ValueError(f"corpus of {len(corpus)} spectra cannot support k={k}")
    grid = corpus[0].grid
    for s in corpus:
        if s.grid != grid:
            raise GridMismatchError("corpus spectra must share one grid")
    data = np.stack([s.values for s in corpus])
    mean = data.mean(axis=0)
    _, sv, vt = np.linalg.svd(data - mean, full_matrices=False)
    basis = vt[:k].T
    # variance captured by each column is non-increasing by construction (sv sorted)
    return BasisModel(basis=basis,
                      mean=Spectrum.reflectance(grid, np.clip(mean, 0.0, 1.0)),
                      smoothness=second_difference_operator(grid.band_count))


def condition_number_reduced(m: np.ndarray, model: BasisModel,
                             smoothness_weight: float = DEFAULT_SMOOTHNESS_WEIGHT) -> float:
    """Conditioning of the coefficient-space operator [M B ; sqrt(w) S B]."""
    if smoothness_weight < 0:
        raise ValueError("smoothness weight must be >= 0")
    mb = np.asarray(m, dtype=np.float64) @ model.basis
    if smoothness_weight == 0.0:
        return condition_number(mb)
    sb = np.sqrt(smoothness_weight) * (model.smoothness @ model.basis)
    return condition_number(np.vstack([mb, sb]))


def sweep_smoothness(m: np.ndarray, model: BasisModel,
                     weights=(1e-4, 1e-3, 1e-2, 1e-1, 1.0)) -> tuple[float, float]:
    """Best (weight, reduced condition number) over a weight sweep."""
    results = [(w, condition_number_reduced(m, model, w)) for w in weights]
    return min(results, key=lambda t: t[1])


# ---------------------------------------------------------------------------
# Window reconstruction
# ---------------------------------------------------------------------------

def aggregate_window(rgb: np.ndarray, labels: np.ndarray,
                     shading: np.ndarray | None = None):
    """Collapse per-pixel window observations into the 9-vector y[(i, n)].

    ``rgb`` is (P, 3) for the P window pixels, ``labels`` their illumination
    labels (0/1/2, negative = unlabeled) and ``shading`` optional per-pixel
    shading divided out first.  Returns (y, available) where ``available``
    marks the rows backed by at least one observation.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    labels = np.asarray(labels)
    if shading is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            rgb = rgb / np.asarray(shading, dtype=np.float64)[:, None]
    y = np.zeros(9)
    available = np.zeros(9, dtype=bool)
    finite = np.all(np.isfinite(rgb), axis=1)
    for i in range(3):
        sel = (labels == i) & finite
        if np.any(sel):
            y[3 * i:3 * i + 3] = rgb[sel].mean(axis=0)
            available[3 * i:3 * i + 3] = True
    return y, available


def solve_coefficients(y: np.ndarray, available: np.ndarray, m: np.ndarray,
                       model: BasisModel, smoothness_weight: float,
                       include_mean: bool = True) -> np.ndarray:
    """Penalty-form regularized least squares for the basis coefficients.

    Stacks the available rows of ``M B`` with ``sqrt(w) S B``; with
    ``include_mean`` the mean spectrum is moved to the right-hand side
    (affine model), otherwise the system is purely linear in ``y``.
    """
    rows = np.flatnonzero(available)
    a = m[rows] @ model.basis
    rhs = y[rows].astype(np.float64)
    if include_mean:
        rhs = rhs - m[rows] @ model.mean.values
    if smoothness_weight > 0.0:
        sb = np.sqrt(smoothness_weight) * (model.smoothness @ model.basis)
        a = np.vstack([a, sb])
        s_rhs = np.zeros(sb.shape[0])
        if include_mean:
            s_rhs = -np.sqrt(smoothness_weight) * (model.smoothness @ model.mean.values)
        rhs = np.concatenate([rhs, s_rhs])
    coeffs, _, _, _ = np.linalg.lstsq(a, rhs, rcond=None)
    return coeffs


class _WindowSolver:
    """Coefficient solver for one row-availability pattern.

    Default mode is the regularized minimum-norm fit: the available data
    equations are satisfied exactly (least-squares optimally when
    inconsistent) and the band-smoothness objective resolves only the
    remaining nullspace, so full-rank subsystems reconstruct in-span
    reflectances to numerical precision.  An explicit smoothness weight
    switches to the penalty form instead.
    """

    def __init__(self, m_rows: np.ndarray, model: BasisModel,
                 smoothness_weight: float | None):
        self.model = model
        self.m_rows = m_rows
        self.mean_response = m_rows @ model.mean.values
        ab = m_rows @ model.basis
        self.weight = smoothness_weight
        sb = model.smoothness @ model.basis
        self.s_mean = model.smoothness @ model.mean.values
        if smoothness_weight is not None and smoothness_weight > 0.0:
            stacked = np.vstack([ab, np.sqrt(smoothness_weight) * sb])
            self.pinv = np.linalg.pinv(stacked)
            self.smooth_rhs = -np.sqrt(smoothness_weight) * self.s_mean
            self.nullspace = None
            self.full_rank = np.linalg.matrix_rank(ab) >= model.k
            return
        u, sv, vt = np.linalg.svd(ab, full_matrices=True)
        tol = max(ab.shape) * np.finfo(np.float64).eps * (sv[0] if len(sv) else 0.0)
        rank = int(np.sum(sv > tol))
        self.full_rank = rank >= model.k
        self.pinv = np.linalg.pinv(ab)
        self.smooth_rhs = None
        if self.full_rank:
            self.nullspace = None
        else:
            n = vt[rank:].T  # (K, n_null)
            self.nullspace = n
            self.sbn_pinv = np.linalg.pinv(sb @ n)
            self.sb = sb

    def solve(self, y: np.ndarray) -> np.ndarray:
        """Batched solve: ``y`` is (P, rows) -> coefficients (P, K)."""
        rhs = y - self.mean_response
        if self.smooth_rhs is not None:
            rhs = np.concatenate(
                [rhs, np.broadcast_to(self.smooth_rhs, (len(y), len(self.smooth_rhs)))],
                axis=1)
            return rhs @ self.pinv.T
        alpha = rhs @ self.pinv.T
        if self.nullspace is not None:
            smooth_resid = alpha @ self.sb.T + self.s_mean
            beta = -(smooth_resid @ self.sbn_pinv.T)
            alpha = alpha + beta @ self.nullspace.T
        return alpha


@dataclass(frozen=True, eq=False)
class WindowReconstruction:
    spectrum: Spectrum          # clipped to [0, 1]
    coefficients: np.ndarray    # basis coefficients of the unclipped solution
    low_confidence: bool        # subsystem was rank-deficient (not all labels seen)

    def unclipped(self, model: "BasisModel") -> np.ndarray:
        return model.mean.values + model.basis @ self.coefficients


def reconstruct_window(intensities: np.ndarray, labels: np.ndarray, m: np.ndarray,
                       model: BasisModel,
                       smoothness_weight: float | None = None,
                       shading: np.ndarray | None = None) -> WindowReconstruction:
    """Recover one reflectance from a window's RGB observations.

    ``intensities`` is (P, 3) with the window's per-pixel RGB, ``labels``
    the per-pixel illumination labels.  Known per-pixel ``shading`` is
    divided out (the synthetic-evaluation mode); without it the shading is
    eliminated by solving for a joint inverse scale as one extra unknown.

    With the default ``smoothness_weight=None`` the solve is the
    regularized minimum-norm fit (see :class:`_WindowSolver`); an explicit
    weight selects the stacked penalty form.
    """
    intensities = np.asarray(intensities, dtype=np.float64)
    if np.any(intensities[np.isfinite(intensities)] < 0.0):
        raise ValueError("intensities must be >= 0")
    if shading is not None:
        y, available = aggregate_window(intensities, labels, shading)
        return _solve_window(y, available, m, model, smoothness_weight)
    return _solve_window_joint_scale(intensities, labels, m, model, smoothness_weight)


def _finish_window(coeffs: np.ndarray, model: BasisModel,
                   rows: np.ndarray) -> WindowReconstruction:
    values = np.clip(model.mean.values + model.basis @ coeffs, 0.0, 1.0)
    low_conf = len(np.unique(rows // 3)) < 3
    return WindowReconstruction(
        spectrum=Spectrum.reflectance(model.grid, values),
        coefficients=coeffs, low_confidence=low_conf)


def _solve_window(y, available, m, model, smoothness_weight) -> WindowReconstruction:
    if not np.any(available):
        return WindowReconstruction(spectrum=model.mean,
                                    coefficients=np.zeros(model.k),
                                    low_confidence=True)
    rows = np.flatnonzero(available)
    solver = _WindowSolver(m[rows], model, smoothness_weight)
    coeffs = solver.solve(y[rows][None, :])[0]
    return _finish_window(coeffs, model, rows)


def _solve_window_joint_scale(intensities, labels, m, model,
                              smoothness_weight) -> WindowReconstruction:
    # Unknown uniform shading s: the model I = s * A r is linearized by
    # solving A(B alpha + mean) - t y = 0 for (alpha, t) with t = 1/s.
    y, available = aggregate_window(intensities, labels, shading=None)
    rows = np.flatnonzero(available)
    if len(rows) == 0:
        return WindowReconstruction(spectrum=model.mean,
                                    coefficients=np.zeros(model.k),
                                    low_confidence=True)
    ab = m[rows] @ model.basis
    a = np.hstack([ab, -y[rows, None]])
    rhs = -(m[rows] @ model.mean.values)
    weight = smoothness_weight
    if weight is None:
        weight = 0.0 if np.linalg.matrix_rank(a) >= model.k + 1 \
            else DEFAULT_SMOOTHNESS_WEIGHT
    if weight > 0.0:
        sb = np.sqrt(weight) * (model.smoothness @ model.basis)
        a = np.vstack([a, np.hstack([sb, np.zeros((sb.shape[0], 1))])])
        rhs = np.concatenate([rhs, -np.sqrt(weight) * (model.smoothness @ model.mean.values)])
    sol, _, _, _ = np.linalg.lstsq(a, rhs, rcond=None)
    return _finish_window(sol[:-1], model, rows)


# ---------------------------------------------------------------------------
# Image-wide reconstruction
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ReconstructionResult:
    reflectance: np.ndarray     # (H, W, N_lambda) float64, NaN where invalid
    valid: np.ndarray           # (H, W) bool
    low_confidence: np.ndarray  # (H, W) bool, window lacked all three labels


def warp_labels(pattern: DotPattern, disparity: np.ndarray) -> np.ndarray:
    """Pattern labels seen by each camera pixel: P(round(u - D), v); -1 invalid."""
    d = np.asarray(disparity, dtype=np.float64)
    h, w = d.shape
    src = np.arange(w, dtype=np.float64)[None, :] - d
    with np.errstate(invalid="ignore"):
        src_round = np.rint(src)
    valid = np.isfinite(src_round) & (src_round >= 0) & (src_round <= pattern.width - 1)
    labels = np.full((h, w), -1, dtype=np.int16)
    rows = np.broadcast_to(np.arange(h, dtype=np.intp)[:, None], (h, w))
    labels[valid] = pattern.codes[rows[valid], src_round[valid].astype(np.intp)]
    return labels


def reconstruct_image(image: np.ndarray, disparity: np.ndarray, pattern: DotPattern,
                      m: np.ndarray, model: BasisModel, *,
                      mask: np.ndarray | None = None,
                      shading: np.ndarray | None = None,
                      smoothness_weight: float | None = None,
                      window: int = 3) -> ReconstructionResult:
    """Sliding-window reconstruction over the whole image.

    Groups windows by which illumination labels they contain so each group
    reduces to one batched normal-equation solve.  Masked pixels contribute
    no observations; pixels whose window has none are invalid.
    """
    img = np.asarray(image, dtype=np.float64)
    d = np.asarray(disparity, dtype=np.float64)
    h, w, _ = img.shape
    labels = warp_labels(pattern, d)
    if mask is None:
        mask = np.ones((h, w), dtype=bool)
    usable = np.asarray(mask, dtype=bool) & (labels >= 0) & \
        np.all(np.isfinite(img), axis=2)
    obs = img.copy()
    if shading is not None:
        s = np.asarray(shading, dtype=np.float64)
        good = np.isfinite(s) & (s > 0.0)
        usable &= good
        with np.errstate(divide="ignore", invalid="ignore"):
            obs = np.where(good[..., None], obs / s[..., None], 0.0)
    obs[~usable] = 0.0

    r = window // 2
    pad = ((r, r), (r, r))
    labels_p = np.pad(np.where(usable, labels, -1), pad, constant_values=-1)
    obs_p = np.pad(obs, pad + ((0, 0),), mode="constant")

    # per-pixel aggregation: sums and counts per illumination label
    sums = np.zeros((h, w, 3, 3))   # (pixel, illum, channel)
    counts = np.zeros((h, w, 3))
    for dv in range(window):
        for du in range(window):
            lab = labels_p[dv:dv + h, du:du + w]
            val = obs_p[dv:dv + h, du:du + w]
            for i in range(3):
                sel = lab == i
                counts[:, :, i] += sel
                sums[:, :, i, :] += sel[..., None] * val

    with np.errstate(divide="ignore", invalid="ignore"):
        y = sums / counts[..., None]  # NaN where a label is absent
    present = counts > 0  # (H, W, 3)

    out = np.full((h, w, model.grid.band_count), np.nan)
    valid = np.zeros((h, w), dtype=bool)
    low_conf = np.zeros((h, w), dtype=bool)

    flat_out = out.reshape(-1, model.grid.band_count)
    flat_valid = valid.reshape(-1)
    flat_low = low_conf.reshape(-1)
    flat_present = present.reshape(-1, 3)
    flat_y = y.reshape(-1, 3, 3)
    for code in range(1, 8):
        combo = np.array([(code >> i) & 1 for i in range(3)], dtype=bool)
        sel = np.flatnonzero(np.all(flat_present == combo, axis=1))
        if len(sel) == 0:
            continue
        rows = np.concatenate([np.arange(3 * i, 3 * i + 3) for i in range(3) if combo[i]])
        # one solver per label combination, batched over its pixels
        solver = _WindowSolver(m[rows], model, smoothness_weight)
        yb = flat_y[sel][:, combo, :].reshape(len(sel), -1)  # (P, 3*n_illum)
        coeffs = solver.solve(yb)
        flat_out[sel] = np.clip(model.mean.values + coeffs @ model.basis.T, 0.0, 1.0)
        flat_valid[sel] = True
        flat_low[sel] = combo.sum() < 3
    return ReconstructionResult(reflectance=out, valid=valid, low_confidence=low_conf)


def warp_illumination(field_cube: np.ndarray, disparity: np.ndarray) -> np.ndarray:
    """Bilinear warp of a projector-frame spectral cube to the camera view."""
    return warp_by_disparity(field_cube, disparity)


# ---------------------------------------------------------------------------
# Basis CSV: one mean row followed by K basis rows (band values as columns).
# ---------------------------------------------------------------------------

def save_basis_csv(path, model: BasisModel) -> None:
    rows = np.vstack([model.mean.values, model.basis.T])
    with open(path, "w") as f:
        for row in rows:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_basis_csv(path, grid: WavelengthGrid) -> BasisModel:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] != grid.band_count:
        raise ValueError(f"{path}: {data.shape[1]} columns != {grid.band_count} bands")
    return BasisModel(basis=data[1:].T,
                      mean=Spectrum.reflectance(grid, np.clip(data[0], 0.0, 1.0)),
                      smoothness=second_difference_operator(grid.band_count))
