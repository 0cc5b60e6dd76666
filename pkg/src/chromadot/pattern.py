"""Random color-dot pattern generation and its illumination-spectrum form.

Every projector pixel carries exactly one of three labels (R=0, G=1, B=2),
drawn independently and uniformly by a counter-based PRNG, so one dot is
one projector pixel.  The serialized one-hot code words are in (R, G, B)
channel order, i.e. R -> (1, 0, 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .spectral import ProjectorPrimaries, Spectrum, WavelengthGrid

LABEL_R, LABEL_G, LABEL_B = 0, 1, 2
LABEL_NAMES = ("R", "G", "B")

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(state: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer (uint64 in, uint64 out)."""
    z = state + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True, eq=False)
class DotPattern:
    """Per-pixel one-hot color codes of the projected pattern."""

    width: int
    height: int
    codes: np.ndarray  # (height, width) uint8 with values in {0, 1, 2}
    seed: int

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.uint8)
        if codes.shape != (self.height, self.width):
            raise ValueError(f"codes shape {codes.shape} != ({self.height}, {self.width})")
        if codes.size and codes.max() > 2:
            raise ValueError("codes must be in {0, 1, 2}")
        codes.flags.writeable = False
        object.__setattr__(self, "codes", codes)

    def one_hot(self) -> np.ndarray:
        """(H, W, 3) float32 one-hot image in (R, G, B) order."""
        out = np.zeros((self.height, self.width, 3), dtype=np.float32)
        np.put_along_axis(out, self.codes[..., None].astype(np.int64), 1.0, axis=2)
        return out

    def pm_image(self) -> np.ndarray:
        """(H, W, 3) float32 +/-1 coding: +1 on the pixel's channel, -1 elsewhere."""
        return self.one_hot() * 2.0 - 1.0


def generate_pattern(width: int, height: int, seed: int) -> DotPattern:
    """Assign each pixel one of {R, G, B} uniformly, deterministic per seed.

    Labels come from a splitmix64 stream over the pixel index, keyed by the
    seed: ``u = mix(seed ^ mix(index)) / 2^64`` and ``label = floor(3 u)``,
    which is bit-identical across platforms.
    """
    if width < 1 or height < 1:
        raise ValueError(f"pattern dimensions must be >= 1, got {width}x{height}")
    idx = np.arange(width * height, dtype=np.uint64)
    mixed = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _splitmix64(idx))
    u = (mixed >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    codes = np.minimum((3.0 * u).astype(np.uint8), 2)
    return DotPattern(width, height, codes.reshape(height, width), seed)


@dataclass(frozen=True, eq=False)
class IlluminationField:
    """Per-pixel illumination spectra induced by a pattern: L_pat.

    Spectra are stored by reference; every pixel's spectrum IS one of the
    three primaries, so ``spectrum_at`` returns the shared object.
    """

    width: int
    height: int
    grid: WavelengthGrid
    labels: np.ndarray  # (H, W) uint8
    primary_spectra: tuple[Spectrum, Spectrum, Spectrum]

    def spectrum_at(self, u: int, v: int) -> Spectrum:
        return self.primary_spectra[int(self.labels[v, u])]

    def cube(self, dtype=np.float64) -> np.ndarray:
        """Materialize the (H, W, band_count) spectral cube."""
        table = np.stack([s.values for s in self.primary_spectra]).astype(dtype)
        return table[self.labels]


def pattern_to_illumination(pattern: DotPattern,
                            primaries: ProjectorPrimaries) -> IlluminationField:
    """Map each pixel label to the matching projector primary."""
    return IlluminationField(
        width=pattern.width,
        height=pattern.height,
        grid=primaries.grid,
        labels=pattern.codes,
        primary_spectra=primaries.as_tuple(),
    )


# ---------------------------------------------------------------------------
# Pattern files: 8-bit RGB PNG with the one-hot channel at 255, plus a JSON
# sidecar {width, height, seed}.  The PNG must agree exactly with
# regeneration from the sidecar seed.
# ---------------------------------------------------------------------------

def _sidecar_path(png_path) -> Path:
    return Path(png_path).with_suffix(".json")


def save_pattern(png_path, pattern: DotPattern) -> None:
    rgb = (pattern.one_hot() * 255.0).astype(np.uint8)
    if not cv2.imwrite(str(png_path), rgb[:, :, ::-1]):  # cv2 writes BGR
        raise IOError(f"could not write {png_path}")
    sidecar = {"format": 1, "width": pattern.width, "height": pattern.height,
               "seed": pattern.seed}
    _sidecar_path(png_path).write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def load_pattern(png_path, verify: bool = True) -> DotPattern:
    """Load a pattern PNG + sidecar; optionally verify it against the seed."""
    meta = json.loads(_sidecar_path(png_path).read_text())
    bgr = cv2.imread(str(png_path), cv2.IMREAD_UNCHANGED)
    if bgr is None:
        raise IOError(f"could not read {png_path}")
    rgb = bgr[:, :, ::-1]
    if rgb.shape != (meta["height"], meta["width"], 3):
        raise ValueError(f"{png_path}: PNG shape {rgb.shape} disagrees with sidecar")
    hot = rgb == 255
    if not np.array_equal(hot.sum(axis=2), np.ones(rgb.shape[:2], dtype=np.int64)) \
            or np.any((rgb != 0) & (rgb != 255)):
        raise ValueError(f"{png_path}: pixels are not one-hot color codes")
    codes = np.argmax(hot, axis=2).astype(np.uint8)
    pattern = DotPattern(meta["width"], meta["height"], codes, meta["seed"])
    if verify:
        regen = generate_pattern(meta["width"], meta["height"], meta["seed"])
        if not np.array_equal(regen.codes, pattern.codes):
            raise ValueError(f"{png_path}: PNG does not match regeneration from seed")
    return pattern
