"""Readers for the renderer's on-disk dataset format.

The trainer talks to the renderer exclusively through these files:

    dataset.json       manifest: rig, grid, pattern, sample dirs, spectra CSVs
    pattern.png/.json  one-hot color-dot pattern (R dot = (255, 0, 0))
    primaries.csv      wavelength_nm,r,g,b columns of the projector SPDs
    <sample>/image.png            16-bit RGB PNG, linear; u16/65535*image_scale
    <sample>/disparity.bin        float32 plane file (header below)
    <sample>/depth.bin            float32 plane file
    <sample>/reflectance.bin      float32 plane file, one plane per band
    <sample>/mask.bin             bit-packed mask with the same header
    <sample>/meta.json            dims, rig, grid, image_scale

Plane files are little-endian: magic(4s) width(u32) height(u32) planes(u32),
then row-major planes; magic CDF1 for floats, CDB1 for masks.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

_HEADER = struct.Struct("<4sIII")
FLOAT_MAGIC = b"CDF1"
MASK_MAGIC = b"CDB1"


class DatasetFormatError(ValueError):
    pass


def read_planes(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetFormatError(f"{path}: truncated header")
    magic, w, h, planes = _HEADER.unpack_from(raw)
    if magic != FLOAT_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != planes * h * w * 4:
        raise DatasetFormatError(f"{path}: payload size mismatch")
    return np.frombuffer(body, dtype="<f4").reshape(planes, h, w).copy()


def read_mask(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, w, h, planes = _HEADER.unpack_from(raw)
    if magic != MASK_MAGIC or planes != 1:
        raise DatasetFormatError(f"{path}: bad mask header")
    bits = np.unpackbits(np.frombuffer(raw[_HEADER.size:], dtype=np.uint8),
                         count=h * w)
    return bits.reshape(h, w).astype(bool)


def read_image(path, scale: float) -> np.ndarray:
    bgr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if bgr is None or bgr.dtype != np.uint16:
        raise DatasetFormatError(f"{path}: expected a 16-bit PNG")
    return bgr[:, :, ::-1].astype(np.float32) * np.float32(scale / 65535.0)


def read_pattern_labels(png_path) -> np.ndarray:
    """(H, W) uint8 labels 0/1/2 decoded from the one-hot pattern PNG."""
    bgr = cv2.imread(str(png_path), cv2.IMREAD_UNCHANGED)
    if bgr is None:
        raise DatasetFormatError(f"{png_path}: unreadable pattern PNG")
    rgb = bgr[:, :, ::-1]
    hot = rgb == 255
    if not np.all(hot.sum(axis=2) == 1):
        raise DatasetFormatError(f"{png_path}: pattern pixels are not one-hot")
    return np.argmax(hot, axis=2).astype(np.uint8)


def read_spectra_csv(path) -> np.ndarray:
    """(curves, bands) array from a wavelength_nm,<name>... CSV."""
    lines = [ln for ln in Path(path).read_text().strip().splitlines() if ln]
    header = lines[0].split(",")
    if header[0] != "wavelength_nm":
        raise DatasetFormatError(f"{path}: expected wavelength_nm header")
    rows = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    return rows[:, 1:].T  # drop the wavelength column


@dataclass
class SampleArrays:
    image: np.ndarray        # (H, W, 3) float32
    disparity: np.ndarray    # (H, W) float32, 0 where undefined
    depth: np.ndarray        # (H, W) float32
    reflectance: np.ndarray  # (H, W, bands) float32
    valid: np.ndarray        # (H, W) bool: shadow mask AND defined ground truth
    finite: np.ndarray       # (H, W) bool: where disparity/depth were defined


def load_sample_dir(directory) -> SampleArrays:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    if meta.get("format") != 1:
        raise DatasetFormatError(f"{d}: unsupported record format")
    image = read_image(d / "image.png", meta["image_scale"])
    disparity = read_planes(d / "disparity.bin")[0]
    depth = read_planes(d / "depth.bin")[0]
    refl = np.moveaxis(read_planes(d / "reflectance.bin"), 0, 2)
    mask = read_mask(d / "mask.bin")
    finite = np.isfinite(disparity) & np.isfinite(depth)
    return SampleArrays(
        image=image,
        disparity=np.where(finite, disparity, 0.0).astype(np.float32),
        depth=np.where(finite, depth, 0.0).astype(np.float32),
        reflectance=refl,
        valid=mask & finite,
        finite=finite,
    )


@dataclass
class Dataset:
    rig: dict
    band_count: int
    pattern_labels: np.ndarray   # (H, W) uint8
    primaries: np.ndarray        # (3, bands) float32
    samples: list[SampleArrays]

    @property
    def max_disparity(self) -> float:
        return float(self.rig.get("max_disparity_px", 192.0))

    def illumination_cube(self) -> np.ndarray:
        """(bands, H, W) float32 per-pixel illumination spectra L_pat."""
        cube = self.primaries[self.pattern_labels]  # (H, W, bands)
        return np.moveaxis(cube, 2, 0).astype(np.float32)

    def pattern_pm(self) -> np.ndarray:
        """(3, H, W) float32 +/-1 coded pattern."""
        one_hot = np.eye(3, dtype=np.float32)[self.pattern_labels]
        return np.moveaxis(one_hot * 2.0 - 1.0, 2, 0)


def load_dataset(root) -> Dataset:
    root = Path(root)
    manifest = json.loads((root / "dataset.json").read_text())
    if manifest.get("format") != 1:
        raise DatasetFormatError(f"{root}: unsupported manifest format")
    files = manifest["files"]
    labels = read_pattern_labels(root / files["pattern"])
    primaries = read_spectra_csv(root / files["primaries"]).astype(np.float32)
    samples = [load_sample_dir(root / name) for name in manifest["samples"]]
    return Dataset(rig=manifest["rig"], band_count=manifest["grid"]["band_count"],
                   pattern_labels=labels, primaries=primaries, samples=samples)
