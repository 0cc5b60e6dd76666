"""Evaluation metrics, sRGB visualization, sample serialization and PLY export.

On-disk sample record layout (one directory per sample):

    image.png        16-bit RGB PNG; linear values, ``u16 / 65535 * image_scale``
    disparity.bin    float32 plane file (see below)
    depth.bin        float32 plane file
    reflectance.bin  float32 plane file with one plane per band
    mask.bin         1-bit packed mask with plane-file header
    meta.json        rig / grid / pattern / scale metadata

Plane files are little-endian with a 16-byte header
``magic(4s) width(u32) height(u32) planes(u32)`` followed by the planes in
row-major order; magic is ``CDF1`` for float planes and ``CDB1`` for packed
masks.  Save/load round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from ._cie import CIE_WAVELENGTHS, CIE_XYZ_1931, D65_SPD, XYZ_TO_SRGB
from .render import RectifiedRig, Sample, SampleMeta
from .spectral import WavelengthGrid

FLOAT_MAGIC = b"CDF1"
MASK_MAGIC = b"CDB1"
_HEADER = struct.Struct("<4sIII")

MRAE_FLOOR = 1e-4  # ground-truth entries below this are excluded from MRAE


class RecordError(ValueError):
    """Corrupt, truncated or inconsistent sample record."""


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    depth_rmse: float
    theta: tuple[float, float, float]  # percentages for thresholds 1.03^i
    refl_rmse: float
    mrae: float
    pixel_count: int

    def to_dict(self) -> dict:
        return {"depth_rmse": self.depth_rmse, "theta": list(self.theta),
                "refl_rmse": self.refl_rmse, "mrae": self.mrae,
                "pixel_count": self.pixel_count}


def depth_metrics(z_hat: np.ndarray, z_gt: np.ndarray,
                  mask: np.ndarray) -> tuple[float, float, float, float]:
    """Depth RMSE plus threshold accuracies theta_i over the valid set.

    theta_i is the percentage of valid pixels whose depth ratio
    ``max(z_hat/z_gt, z_gt/z_hat)`` stays below ``1.03**i``.
    """
    z_hat = np.asarray(z_hat, dtype=np.float64)
    z_gt = np.asarray(z_gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not np.any(mask):
        raise ValueError("empty evaluation mask")
    zh = z_hat[mask]
    zg = z_gt[mask]
    if np.any(~(zh > 0.0)) or np.any(~(zg > 0.0)):
        raise ValueError("depths must be positive on the evaluation mask")
    rmse = float(np.sqrt(np.mean((zh - zg) ** 2)))
    ratio = np.maximum(zh / zg, zg / zh)
    thetas = tuple(float(100.0 * np.mean(ratio < 1.03**i)) for i in (1, 2, 3))
    return (rmse, *thetas)


def reflectance_metrics(r_hat: np.ndarray, r_gt: np.ndarray,
                        mask: np.ndarray) -> tuple[float, float]:
    """Reflectance RMSE and MRAE over all (valid pixel, band) entries.

    MRAE is mean(|r_hat - r_gt| / r_gt); entries with ground truth below
    ``MRAE_FLOOR`` are excluded from the MRAE mean (RMSE keeps them).
    """
    r_hat = np.asarray(r_hat, dtype=np.float64)
    r_gt = np.asarray(r_gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not np.any(mask):
        raise ValueError("empty evaluation mask")
    dh = r_hat[mask]
    dg = r_gt[mask]
    rmse = float(np.sqrt(np.mean((dh - dg) ** 2)))
    ok = dg >= MRAE_FLOOR
    if not np.any(ok):
        raise ValueError("no reflectance entries above the MRAE floor")
    mrae = float(np.mean(np.abs(dh[ok] - dg[ok]) / dg[ok]))
    return rmse, mrae


def evaluate(z_hat, z_gt, r_hat, r_gt, mask) -> MetricsReport:
    rmse, t1, t2, t3 = depth_metrics(z_hat, z_gt, mask)
    refl_rmse, mrae = reflectance_metrics(r_hat, r_gt, mask)
    return MetricsReport(depth_rmse=rmse, theta=(t1, t2, t3), refl_rmse=refl_rmse,
                         mrae=mrae, pixel_count=int(np.count_nonzero(mask)))


# ---------------------------------------------------------------------------
# sRGB visualization
# ---------------------------------------------------------------------------

def reflectance_to_srgb(cube: np.ndarray, grid: WavelengthGrid) -> np.ndarray:
    """Render a reflectance cube under D65 into gamma-encoded sRGB in [0, 1].

    The CIE observer and D65 tables are resampled to the cube's grid; XYZ
    is normalized by the white point's Y so a unit reflectance maps to
    (near) white, then converted by the standard sRGB matrix and gamma.
    """
    cube = np.asarray(cube, dtype=np.float64)
    lam = grid.wavelengths()
    if lam[0] < CIE_WAVELENGTHS[0] or lam[-1] > CIE_WAVELENGTHS[-1]:
        raise ValueError("grid extends outside the tabulated observer range")
    cmf = np.stack([np.interp(lam, CIE_WAVELENGTHS, CIE_XYZ_1931[:, i]) for i in range(3)])
    d65 = np.interp(lam, CIE_WAVELENGTHS, D65_SPD)
    weights = cmf * d65  # (3, bands)
    y_white = weights[1].sum()
    xyz = np.einsum("...l,cl->...c", cube, weights) / y_white
    linear = np.clip(np.einsum("...c,rc->...r", xyz, XYZ_TO_SRGB), 0.0, 1.0)
    srgb = np.where(linear <= 0.0031308, 12.92 * linear,
                    1.055 * np.power(linear, 1.0 / 2.4) - 0.055)
    return np.clip(srgb, 0.0, 1.0)


def linear_srgb(cube: np.ndarray, grid: WavelengthGrid) -> np.ndarray:
    """Pre-gamma linear sRGB channels (exactly linear in the reflectance)."""
    cube = np.asarray(cube, dtype=np.float64)
    lam = grid.wavelengths()
    cmf = np.stack([np.interp(lam, CIE_WAVELENGTHS, CIE_XYZ_1931[:, i]) for i in range(3)])
    d65 = np.interp(lam, CIE_WAVELENGTHS, D65_SPD)
    weights = cmf * d65
    xyz = np.einsum("...l,cl->...c", cube, weights) / weights[1].sum()
    return np.einsum("...c,rc->...r", xyz, XYZ_TO_SRGB)


# ---------------------------------------------------------------------------
# Plane files
# ---------------------------------------------------------------------------

def save_planes(path, data: np.ndarray) -> None:
    """Write a (planes, H, W) or (H, W) float32 array as a plane file."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    planes, h, w = arr.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(FLOAT_MAGIC, w, h, planes))
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_planes(path) -> np.ndarray:
    """Read a plane file back as (planes, H, W) float32."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise RecordError(f"{path}: truncated header")
    magic, w, h, planes = _HEADER.unpack_from(raw)
    if magic != FLOAT_MAGIC:
        raise RecordError(f"{path}: bad magic {magic!r}, expected {FLOAT_MAGIC!r}")
    need = planes * h * w * 4
    body = raw[_HEADER.size:]
    if len(body) < need:
        got_planes = len(body) // (h * w * 4)
        raise RecordError(
            f"{path}: truncated at plane {got_planes} of {planes}")
    if len(body) > need:
        raise RecordError(f"{path}: {len(body) - need} trailing bytes")
    return np.frombuffer(body, dtype="<f4").reshape(planes, h, w).copy()


def save_mask(path, mask: np.ndarray) -> None:
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MASK_MAGIC, w, h, 1))
        f.write(np.packbits(m).tobytes())


def load_mask(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise RecordError(f"{path}: truncated header")
    magic, w, h, planes = _HEADER.unpack_from(raw)
    if magic != MASK_MAGIC:
        raise RecordError(f"{path}: bad magic {magic!r}, expected {MASK_MAGIC!r}")
    need = (h * w + 7) // 8
    body = raw[_HEADER.size:]
    if len(body) != need or planes != 1:
        raise RecordError(f"{path}: mask payload size mismatch")
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8), count=h * w)
    return bits.reshape(h, w).astype(bool)


# ---------------------------------------------------------------------------
# Sample records
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SampleRecord:
    """The on-disk form of a Sample (image quantized to 16 bits)."""

    image_u16: np.ndarray      # (H, W, 3) uint16
    image_scale: float         # image = image_u16 / 65535 * image_scale
    disparity: np.ndarray      # (H, W) float32
    depth: np.ndarray          # (H, W) float32
    reflectance: np.ndarray    # (H, W, bands) float32
    mask: np.ndarray           # (H, W) bool
    meta: SampleMeta

    @classmethod
    def from_sample(cls, sample: Sample) -> "SampleRecord":
        img = np.asarray(sample.image_I, dtype=np.float64)
        finite_max = float(np.nanmax(img)) if img.size else 0.0
        scale = finite_max if finite_max > 0.0 else 1.0
        u16 = np.rint(np.clip(img / scale, 0.0, 1.0) * 65535.0).astype(np.uint16)
        return cls(image_u16=u16, image_scale=scale,
                   disparity=sample.disparity_gt.astype(np.float32),
                   depth=sample.depth_gt.astype(np.float32),
                   reflectance=sample.reflectance_gt.astype(np.float32),
                   mask=sample.mask_V.copy(), meta=sample.meta)

    def image_float(self) -> np.ndarray:
        return self.image_u16.astype(np.float32) * np.float32(self.image_scale / 65535.0)

    def to_sample(self) -> Sample:
        return Sample(image_I=self.image_float(),
                      disparity_gt=self.disparity.astype(np.float64),
                      depth_gt=self.depth.astype(np.float64),
                      reflectance_gt=self.reflectance.copy(),
                      mask_V=self.mask.copy(), meta=self.meta)


def save_sample(directory, record: SampleRecord) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    h, w, _ = record.image_u16.shape
    if not cv2.imwrite(str(d / "image.png"), record.image_u16[:, :, ::-1]):
        raise IOError(f"could not write {d / 'image.png'}")
    save_planes(d / "disparity.bin", record.disparity)
    save_planes(d / "depth.bin", record.depth)
    save_planes(d / "reflectance.bin", np.moveaxis(record.reflectance, 2, 0))
    save_mask(d / "mask.bin", record.mask)
    meta = record.meta.to_dict()
    meta.update({"format": 1, "width": w, "height": h,
                 "image_scale": record.image_scale})
    (d / "meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")


def load_sample(directory) -> SampleRecord:
    d = Path(directory)
    meta_d = json.loads((d / "meta.json").read_text())
    if meta_d.get("format") != 1:
        raise RecordError(f"{d}: unsupported record format {meta_d.get('format')!r}")
    w, h = meta_d["width"], meta_d["height"]
    bgr = cv2.imread(str(d / "image.png"), cv2.IMREAD_UNCHANGED)
    if bgr is None:
        raise RecordError(f"{d}: missing or unreadable image.png")
    if bgr.dtype != np.uint16 or bgr.shape != (h, w, 3):
        raise RecordError(f"{d}: image.png is not {w}x{h} 16-bit RGB")
    image_u16 = bgr[:, :, ::-1].copy()

    def check_shape(name, arr, planes):
        if arr.shape != (planes, h, w):
            raise RecordError(f"{d}/{name}: shape {arr.shape} disagrees with meta "
                              f"({planes}, {h}, {w})")
        return arr

    disparity = check_shape("disparity.bin", load_planes(d / "disparity.bin"), 1)[0]
    depth = check_shape("depth.bin", load_planes(d / "depth.bin"), 1)[0]
    bands = meta_d["grid"]["band_count"]
    refl = check_shape("reflectance.bin", load_planes(d / "reflectance.bin"), bands)
    mask = load_mask(d / "mask.bin")
    if mask.shape != (h, w):
        raise RecordError(f"{d}/mask.bin: shape {mask.shape} disagrees with meta")
    return SampleRecord(image_u16=image_u16, image_scale=meta_d["image_scale"],
                        disparity=disparity, depth=depth,
                        reflectance=np.moveaxis(refl, 0, 2), mask=mask,
                        meta=SampleMeta.from_dict(meta_d))


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------

def export_point_cloud(depth: np.ndarray, rig: RectifiedRig, colors: np.ndarray,
                       mask: np.ndarray) -> str:
    """ASCII PLY of the unprojected valid pixels, colored from an sRGB image.

    Pixel (u, v) with depth Z unprojects to ((u-cx)/f*Z, (v-cy)/f*Z, Z).
    """
    z = np.asarray(depth, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool) & np.isfinite(z)
    cx, cy = rig.principal_point
    vs, us = np.nonzero(mask)
    zs = z[vs, us]
    xs = (us - cx) / rig.focal_px * zs
    ys = (vs - cy) / rig.focal_px * zs
    col = np.asarray(colors)
    if col.dtype != np.uint8:
        col = np.rint(np.clip(col, 0.0, 1.0) * 255.0).astype(np.uint8)
    rgb = col[vs, us]
    lines = [
        "ply", "format ascii 1.0", f"element vertex {len(us)}",
        "property float x", "property float y", "property float z",
        "property uchar red", "property uchar green", "property uchar blue",
        "end_header",
    ]
    for x, y, zz, (r, g, b) in zip(xs, ys, zs, rgb):
        lines.append(f"{x:.9g} {y:.9g} {zz:.9g} {r} {g} {b}")
    return "\n".join(lines) + "\n"
