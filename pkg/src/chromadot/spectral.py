"""Wavelength grids, spectral curves and the pixel-level rendering model.

The scene radiometry is fully described by four ingredients: a shading
scalar ``s``, the camera sensitivity matrix ``c`` (3 channels), the
illumination spectrum ``l`` at the surface point and the surface
reflectance ``r``.  A camera pixel value for channel ``n`` is the
band-wise sum

    I(n) = s * sum_lambda c(n, lambda) * l(lambda) * r(lambda)

i.e. a rectangle-rule discretization of the continuous model; the band
width (10 nm on the default grid) is folded into the illumination
magnitudes rather than carried as an explicit factor.

All spectral arithmetic is done in float64.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class GridMismatchError(ValueError):
    """Spectral quantities defined on different wavelength grids were mixed."""


@dataclass(frozen=True)
class WavelengthGrid:
    """Uniform wavelength sampling. Default: 410-670 nm in 10 nm steps (27 bands)."""

    start_nm: float = 410.0
    step_nm: float = 10.0
    band_count: int = 27

    def __post_init__(self):
        if self.band_count < 1:
            raise ValueError(f"band_count must be >= 1, got {self.band_count}")
        if self.step_nm <= 0:
            raise ValueError(f"step_nm must be positive, got {self.step_nm}")

    @property
    def stop_nm(self) -> float:
        return self.start_nm + (self.band_count - 1) * self.step_nm

    def wavelengths(self) -> np.ndarray:
        return self.start_nm + self.step_nm * np.arange(self.band_count, dtype=np.float64)


DEFAULT_GRID = WavelengthGrid()


def _check_same_grid(*grids: WavelengthGrid) -> WavelengthGrid:
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatchError(f"wavelength grids differ: {first} vs {g}")
    return first


@dataclass(frozen=True, eq=False)
class Spectrum:
    """A per-band spectral curve on a wavelength grid.

    ``kind`` is either ``"reflectance"`` (values in [0, 1], unitless) or
    ``"illumination"`` (values >= 0, radiometric power per band).
    """

    grid: WavelengthGrid
    values: np.ndarray
    kind: str = "reflectance"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.band_count,):
            raise GridMismatchError(
                f"spectrum has {vals.shape} values for a {self.grid.band_count}-band grid")
        if self.kind == "reflectance":
            if np.any(vals < 0.0) or np.any(vals > 1.0):
                raise ValueError("reflectance values must lie in [0, 1]")
        elif self.kind == "illumination":
            if np.any(vals < 0.0):
                raise ValueError("illumination values must be >= 0")
        else:
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def reflectance(cls, grid: WavelengthGrid, values) -> "Spectrum":
        return cls(grid, values, kind="reflectance")

    @classmethod
    def illumination(cls, grid: WavelengthGrid, values) -> "Spectrum":
        return cls(grid, values, kind="illumination")


@dataclass(frozen=True, eq=False)
class CameraSensitivity:
    """Per-channel spectral sensitivities, channel order (R, G, B)."""

    grid: WavelengthGrid
    channels: np.ndarray  # shape (3, band_count), all >= 0

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.shape != (3, self.grid.band_count):
            raise GridMismatchError(
                f"sensitivity shape {ch.shape} does not match (3, {self.grid.band_count})")
        if np.any(ch < 0.0):
            raise ValueError("sensitivities must be >= 0")
        if np.any(np.all(ch == 0.0, axis=1)):
            raise ValueError("each sensitivity channel needs at least one nonzero entry")
        ch.flags.writeable = False
        object.__setattr__(self, "channels", ch)


@dataclass(frozen=True, eq=False)
class ProjectorPrimaries:
    """Spectral power distributions of the projector's R, G and B primaries."""

    grid: WavelengthGrid
    r_primary: Spectrum
    g_primary: Spectrum
    b_primary: Spectrum

    def __post_init__(self):
        for s in (self.r_primary, self.g_primary, self.b_primary):
            _check_same_grid(self.grid, s.grid)
            if s.kind != "illumination":
                raise ValueError("primaries must be illumination-kind spectra")
            if not np.any(s.values > 0.0):
                raise ValueError("each primary must be nonzero somewhere")

    def as_tuple(self) -> tuple[Spectrum, Spectrum, Spectrum]:
        return (self.r_primary, self.g_primary, self.b_primary)

    def as_matrix(self) -> np.ndarray:
        """Stacked (3, band_count) array in (R, G, B) order."""
        return np.stack([s.values for s in self.as_tuple()])


def render_pixel(s: float, c: CameraSensitivity, l: Spectrum, r: Spectrum) -> np.ndarray:
    """Camera RGB response for one surface point: ``s * c^T Diag(l) r``.

    Parameters
    ----------
    s : shading scalar, >= 0.
    c : camera sensitivity.
    l : illumination spectrum at the point.
    r : surface reflectance (reflectance-kind).

    Returns
    -------
    (3,) float64 array, all entries >= 0.
    """
    if s < 0.0:
        raise ValueError(f"shading factor must be >= 0, got {s}")
    if r.kind != "reflectance":
        raise ValueError("r must be a reflectance-kind spectrum")
    _check_same_grid(c.grid, l.grid, r.grid)
    return s * (c.channels @ (l.values * r.values))


def shading_factor(x: np.ndarray, x_pro: np.ndarray, n: np.ndarray) -> float:
    """Lambertian shading with inverse-square falloff.

    ``(1/||x_pro - x||^2) * ((x_pro - x)/||x_pro - x|| . n)``, clamped to
    zero for back-facing points.  ``n`` must be unit length (1e-6).
    """
    x = np.asarray(x, dtype=np.float64)
    x_pro = np.asarray(x_pro, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise ValueError("normal must be unit length")
    d = x_pro - x
    dist = np.linalg.norm(d)
    if dist == 0.0:
        raise ValueError("surface point coincides with the projector position")
    cos = float(d @ n) / dist
    return max(cos, 0.0) / (dist * dist)


def _gaussian_curve(grid: WavelengthGrid, center_nm: float, std_nm: float) -> np.ndarray:
    lam = grid.wavelengths()
    return np.exp(-0.5 * ((lam - center_nm) / std_nm) ** 2)


def default_primaries(grid: WavelengthGrid = DEFAULT_GRID) -> ProjectorPrimaries:
    """Gaussian stand-in SPDs: R/G/B centered at 615/545/460 nm, 25 nm std, peak 1."""
    return ProjectorPrimaries(
        grid,
        r_primary=Spectrum.illumination(grid, _gaussian_curve(grid, 615.0, 25.0)),
        g_primary=Spectrum.illumination(grid, _gaussian_curve(grid, 545.0, 25.0)),
        b_primary=Spectrum.illumination(grid, _gaussian_curve(grid, 460.0, 25.0)),
    )


def default_sensitivity(grid: WavelengthGrid = DEFAULT_GRID) -> CameraSensitivity:
    """Overlapping Gaussian camera channels centered at 610/540/460 nm, 35 nm std."""
    return CameraSensitivity(grid, np.stack([
        _gaussian_curve(grid, 610.0, 35.0),
        _gaussian_curve(grid, 540.0, 35.0),
        _gaussian_curve(grid, 460.0, 35.0),
    ]))


# ---------------------------------------------------------------------------
# CSV import/export.
#
# Single spectrum: header "wavelength_nm,value".  Sensitivities: header
# "wavelength_nm,r,g,b".  Rows must be strictly ascending in wavelength;
# curves are resampled onto the target grid by linear interpolation
# (end values are held constant outside the tabulated range).
# ---------------------------------------------------------------------------

def _read_csv_columns(path, expected_header: list[str]) -> np.ndarray:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected_header:
            raise ValueError(f"{path}: expected header {','.join(expected_header)!r}")
        rows = [[float(cell) for cell in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    if data.shape[1] != len(expected_header):
        raise ValueError(f"{path}: inconsistent column count")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"{path}: wavelengths must be strictly ascending")
    return data


def load_spectrum_csv(path, grid: WavelengthGrid = DEFAULT_GRID,
                      kind: str = "reflectance") -> Spectrum:
    data = _read_csv_columns(path, ["wavelength_nm", "value"])
    vals = np.interp(grid.wavelengths(), data[:, 0], data[:, 1])
    return Spectrum(grid, vals, kind=kind)


def save_spectrum_csv(path, spectrum: Spectrum) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["wavelength_nm", "value"])
        for lam, v in zip(spectrum.grid.wavelengths(), spectrum.values):
            writer.writerow([f"{lam:g}", repr(float(v))])


def load_sensitivity_csv(path, grid: WavelengthGrid = DEFAULT_GRID) -> CameraSensitivity:
    data = _read_csv_columns(path, ["wavelength_nm", "r", "g", "b"])
    lam = grid.wavelengths()
    channels = np.stack([np.interp(lam, data[:, 0], data[:, 1 + i]) for i in range(3)])
    return CameraSensitivity(grid, channels)


def save_sensitivity_csv(path, sens: CameraSensitivity) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["wavelength_nm", "r", "g", "b"])
        for i, lam in enumerate(sens.grid.wavelengths()):
            writer.writerow([f"{lam:g}"] + [repr(float(v)) for v in sens.channels[:, i]])


def load_spectra_csv(path, grid: WavelengthGrid = DEFAULT_GRID,
                     kind: str = "reflectance") -> list[Spectrum]:
    """Multi-spectrum CSV: ``wavelength_nm`` column plus one column per curve."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0].strip() != "wavelength_nm" or len(header) < 2:
            raise ValueError(f"{path}: expected header wavelength_nm,<name>,...")
        rows = [[float(cell) for cell in row] for row in reader if row]
    data = np.asarray(rows, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: inconsistent column count")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"{path}: wavelengths must be strictly ascending")
    lam = grid.wavelengths()
    return [Spectrum(grid, np.interp(lam, data[:, 0], data[:, 1 + i]), kind=kind)
            for i in range(len(header) - 1)]


def save_spectra_csv(path, spectra: list[Spectrum]) -> None:
    if not spectra:
        raise ValueError("no spectra to save")
    grid = _check_same_grid(*[s.grid for s in spectra])
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["wavelength_nm"] + [f"s{i:03d}" for i in range(len(spectra))])
        for i, lam in enumerate(grid.wavelengths()):
            writer.writerow([f"{lam:g}"] + [repr(float(s.values[i])) for s in spectra])


def load_primaries_csv(path, grid: WavelengthGrid = DEFAULT_GRID) -> ProjectorPrimaries:
    """Primaries share the sensitivity CSV layout: columns r,g,b are the SPDs."""
    data = _read_csv_columns(path, ["wavelength_nm", "r", "g", "b"])
    lam = grid.wavelengths()
    specs = [Spectrum.illumination(grid, np.interp(lam, data[:, 0], data[:, 1 + i]))
             for i in range(3)]
    return ProjectorPrimaries(grid, *specs)


def save_primaries_csv(path, primaries: ProjectorPrimaries) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["wavelength_nm", "r", "g", "b"])
        mat = primaries.as_matrix()
        for i, lam in enumerate(primaries.grid.wavelengths()):
            writer.writerow([f"{lam:g}"] + [repr(float(v)) for v in mat[:, i]])
