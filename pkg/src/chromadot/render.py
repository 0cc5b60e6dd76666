"""Rectified projector-camera scene rendering with full ground truth.

The camera sits at the origin looking down +z; the projector shares the
camera's orientation and intrinsics and sits at ``(baseline, 0, 0)``, so
the pair is rectified by construction and disparity is a pure horizontal
shift: ``D = b * f / Z``.  Rays are parameterized as ``x = t * dir`` with
``dir = ((u - cx)/f, (v - cy)/f, 1)``, which makes ``t`` the metric depth.

Rendering a scene produces a :class:`Sample`: the color-dot RGB image plus
ground-truth disparity, depth, per-band reflectance and the shadow mask V
(pixels receiving direct projector light).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pattern import DotPattern, generate_pattern
from .spectral import (
    DEFAULT_GRID,
    CameraSensitivity,
    GridMismatchError,
    ProjectorPrimaries,
    Spectrum,
    WavelengthGrid,
    default_primaries,
    default_sensitivity,
    load_primaries_csv,
    load_sensitivity_csv,
    load_spectra_csv,
)

SHADOW_RAY_EPS = 1e-5  # meters; offset that keeps shadow rays off their own surface
_HIT_EPS = 1e-9


class SceneConfigError(ValueError):
    """Invalid scene or dataset configuration."""


@dataclass(frozen=True)
class RectifiedRig:
    """Projector-camera geometry: shared intrinsics, projector at (b, 0, 0)."""

    baseline_m: float
    focal_px: float
    principal_point: tuple[float, float]
    width: int
    height: int
    max_disparity_px: float = 192.0

    def __post_init__(self):
        if self.baseline_m <= 0 or self.focal_px <= 0:
            raise ValueError("baseline and focal length must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("rig resolution must be >= 1")
        if self.max_disparity_px <= 0:
            raise ValueError("max_disparity_px must be positive")

    @property
    def projector_center(self) -> np.ndarray:
        return np.array([self.baseline_m, 0.0, 0.0])

    def to_dict(self) -> dict:
        return {"baseline_m": self.baseline_m, "focal_px": self.focal_px,
                "cx": self.principal_point[0], "cy": self.principal_point[1],
                "width": self.width, "height": self.height,
                "max_disparity_px": self.max_disparity_px}

    @classmethod
    def from_dict(cls, d: dict) -> "RectifiedRig":
        return cls(baseline_m=d["baseline_m"], focal_px=d["focal_px"],
                   principal_point=(d["cx"], d["cy"]), width=d["width"],
                   height=d["height"],
                   max_disparity_px=d.get("max_disparity_px", 192.0))


def depth_from_disparity(disparity, rig: RectifiedRig):
    """``Z = b * f / D``.  Nonpositive disparities are a domain error; NaNs pass."""
    d = np.asarray(disparity, dtype=np.float64)
    if np.any(d[np.isfinite(d)] <= 0.0):
        raise ValueError("disparity must be positive")
    out = rig.baseline_m * rig.focal_px / d
    return float(out) if np.isscalar(disparity) else out


def disparity_from_depth(depth, rig: RectifiedRig):
    """``D = b * f / Z``, the inverse of :func:`depth_from_disparity`."""
    z = np.asarray(depth, dtype=np.float64)
    if np.any(z[np.isfinite(z)] <= 0.0):
        raise ValueError("depth must be positive")
    out = rig.baseline_m * rig.focal_px / z
    return float(out) if np.isscalar(depth) else out


# ---------------------------------------------------------------------------
# Primitives.  Each exposes a vectorized intersect() over ray batches and
# references reflectances by index into the scene table (meshes may carry a
# per-face index array).
# ---------------------------------------------------------------------------

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class Plane:
    """Axis-aligned plane, optionally bounded to a rectangle on the other axes."""

    axis: str
    offset: float
    reflectance: int = 0
    bounds: tuple[tuple[float, float], tuple[float, float]] | None = None

    def __post_init__(self):
        if self.axis not in _AXIS_INDEX:
            raise SceneConfigError(f"plane axis must be x, y or z, got {self.axis!r}")

    def intersect(self, origins: np.ndarray, dirs: np.ndarray):
        k = _AXIS_INDEX[self.axis]
        others = [i for i in range(3) if i != k]
        dk = dirs[:, k]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.offset - origins[:, k]) / dk
        t = np.where((dk != 0.0) & (t > _HIT_EPS), t, np.inf)
        if self.bounds is not None:
            for axis_i, (lo, hi) in zip(others, self.bounds):
                finite = np.isfinite(t)
                coord = origins[:, axis_i] + np.where(finite, t, 0.0) * dirs[:, axis_i]
                t = np.where(finite & (coord >= lo) & (coord <= hi), t, np.inf)
        normal = np.zeros(3)
        normal[k] = 1.0
        normals = np.broadcast_to(normal, dirs.shape)
        ridx = np.full(len(t), self.reflectance, dtype=np.intp)
        return t, normals, ridx


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    reflectance: int = 0

    def __post_init__(self):
        if self.radius <= 0:
            raise SceneConfigError("sphere radius must be positive")

    def intersect(self, origins: np.ndarray, dirs: np.ndarray):
        c = np.asarray(self.center, dtype=np.float64)
        oc = origins - c
        a = np.sum(dirs * dirs, axis=1)
        b = 2.0 * np.sum(oc * dirs, axis=1)
        cc = np.sum(oc * oc, axis=1) - self.radius**2
        disc = b * b - 4.0 * a * cc
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = (-b - sq) / (2.0 * a)
        t1 = (-b + sq) / (2.0 * a)
        t = np.where(t0 > _HIT_EPS, t0, t1)
        t = np.where((disc >= 0.0) & (t > _HIT_EPS), t, np.inf)
        pts = origins + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
        normals = (pts - c) / self.radius
        ridx = np.full(len(t), self.reflectance, dtype=np.intp)
        return t, normals, ridx


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Triangle soup with per-face normals; reflectance per mesh or per face."""

    vertices: np.ndarray  # (N, 3)
    faces: np.ndarray     # (M, 3) int
    reflectance: int | np.ndarray = 0

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.intp)
        if v.ndim != 2 or v.shape[1] != 3 or f.ndim != 2 or f.shape[1] != 3:
            raise SceneConfigError("mesh needs (N,3) vertices and (M,3) faces")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise SceneConfigError("face indices out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        r = self.reflectance
        if not np.isscalar(r):
            r = np.asarray(r, dtype=np.intp)
            if r.shape != (len(f),):
                raise SceneConfigError("per-face reflectance must have one entry per face")
            object.__setattr__(self, "reflectance", r)

    def _face_reflectance(self) -> np.ndarray:
        if np.isscalar(self.reflectance):
            return np.full(len(self.faces), self.reflectance, dtype=np.intp)
        return self.reflectance

    def intersect(self, origins: np.ndarray, dirs: np.ndarray):
        n_rays = len(origins)
        best_t = np.full(n_rays, np.inf)
        best_face = np.full(n_rays, -1, dtype=np.intp)
        v = self.vertices
        # Moller-Trumbore, batched over rays, one triangle at a time
        for fi, (i, j, k) in enumerate(self.faces):
            e1 = v[j] - v[i]
            e2 = v[k] - v[i]
            pvec = np.cross(dirs, e2)
            det = pvec @ e1
            with np.errstate(divide="ignore", invalid="ignore"):
                inv = 1.0 / det
                tvec = origins - v[i]
                uu = np.sum(tvec * pvec, axis=1) * inv
                qvec = np.cross(tvec, e1)
                vv = np.sum(dirs * qvec, axis=1) * inv
                t = (qvec @ e2) * inv
            with np.errstate(invalid="ignore"):
                ok = (np.abs(det) > 1e-14) & (uu >= 0.0) & (vv >= 0.0) \
                    & (uu + vv <= 1.0) & (t > _HIT_EPS) & (t < best_t)
            best_t = np.where(ok, t, best_t)
            best_face = np.where(ok, fi, best_face)

        normals = np.zeros((n_rays, 3))
        ridx = np.zeros(n_rays, dtype=np.intp)
        hit = best_face >= 0
        if np.any(hit):
            fidx = best_face[hit]
            tri = v[self.faces[fidx]]
            fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
            fn /= np.linalg.norm(fn, axis=1, keepdims=True)
            normals[hit] = fn
            ridx[hit] = self._face_reflectance()[fidx]
        return best_t, normals, ridx


def load_mesh(path, reflectance: int = 0) -> TriangleMesh:
    """Read the ASCII triangle format: ``v x y z`` / ``f i j k`` (1-indexed)."""
    verts, faces = [], []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v" and len(parts) == 4:
            verts.append([float(p) for p in parts[1:]])
        elif parts[0] == "f" and len(parts) == 4:
            faces.append([int(p) - 1 for p in parts[1:]])
        else:
            raise SceneConfigError(f"{path}:{line_no}: unrecognized mesh line {line!r}")
    return TriangleMesh(np.asarray(verts), np.asarray(faces), reflectance)


def save_mesh(path, mesh: TriangleMesh) -> None:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True, eq=False)
class Scene:
    """Renderable primitives plus the shared reflectance table."""

    objects: tuple
    reflectances: tuple[Spectrum, ...]
    grid: WavelengthGrid = DEFAULT_GRID

    def __post_init__(self):
        if not self.reflectances:
            raise SceneConfigError("scene needs at least one reflectance")
        for r in self.reflectances:
            if r.kind != "reflectance":
                raise SceneConfigError("scene reflectances must be reflectance-kind")
            if r.grid != self.grid:
                raise GridMismatchError("scene reflectances must share the scene grid")
        n = len(self.reflectances)
        for obj in self.objects:
            r = obj.reflectance
            bad = (np.any(r < 0) or np.any(np.asarray(r) >= n)) if not np.isscalar(r) \
                else (r < 0 or r >= n)
            if bad:
                raise SceneConfigError("object reflectance index out of range")

    def reflectance_table(self) -> np.ndarray:
        return np.stack([r.values for r in self.reflectances])


# ---------------------------------------------------------------------------
# Ray tracing
# ---------------------------------------------------------------------------

def _trace_rays(scene: Scene, origins: np.ndarray, dirs: np.ndarray):
    """Nearest hit over all objects: (t, normals, reflectance index); inf = miss."""
    n = len(origins)
    best_t = np.full(n, np.inf)
    best_n = np.zeros((n, 3))
    best_r = np.zeros(n, dtype=np.intp)
    for obj in scene.objects:
        t, normals, ridx = obj.intersect(origins, dirs)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_n[closer] = normals[closer]
        best_r[closer] = ridx[closer]
    return best_t, best_n, best_r


def _camera_directions(rig: RectifiedRig) -> np.ndarray:
    cx, cy = rig.principal_point
    u = np.arange(rig.width, dtype=np.float64)
    v = np.arange(rig.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    return np.stack([(uu - cx) / rig.focal_px, (vv - cy) / rig.focal_px,
                     np.ones_like(uu)], axis=-1)


@dataclass(frozen=True)
class SurfaceHit:
    x: np.ndarray
    n: np.ndarray
    reflectance: Spectrum
    depth: float


def trace_camera_ray(scene: Scene, rig: RectifiedRig, u: int, v: int) -> SurfaceHit | None:
    """Nearest intersection of the camera ray through pixel (u, v); None on miss."""
    if not (0 <= u < rig.width and 0 <= v < rig.height):
        raise ValueError(f"pixel ({u}, {v}) outside {rig.width}x{rig.height} image")
    cx, cy = rig.principal_point
    d = np.array([[(u - cx) / rig.focal_px, (v - cy) / rig.focal_px, 1.0]])
    t, n, ridx = _trace_rays(scene, np.zeros((1, 3)), d)
    if not np.isfinite(t[0]):
        return None
    normal = n[0] if n[0] @ d[0] < 0 else -n[0]
    return SurfaceHit(x=t[0] * d[0], n=normal,
                      reflectance=scene.reflectances[ridx[0]], depth=float(t[0]))


OUT_OF_FRUSTUM = -1


def projector_code_at(x: np.ndarray, rig: RectifiedRig, pattern: DotPattern) -> int:
    """Pattern label seen at 3D point ``x``: reproject into the projector and
    sample the nearest pixel center.  Returns OUT_OF_FRUSTUM when the point
    projects outside the pattern (or has nonpositive depth)."""
    x = np.asarray(x, dtype=np.float64)
    if x[2] <= 0.0:
        return OUT_OF_FRUSTUM
    cx, cy = rig.principal_point
    up = int(np.rint(cx + rig.focal_px * (x[0] - rig.baseline_m) / x[2]))
    vp = int(np.rint(cy + rig.focal_px * x[1] / x[2]))
    if not (0 <= up < pattern.width and 0 <= vp < pattern.height):
        return OUT_OF_FRUSTUM
    return int(pattern.codes[vp, up])


def is_projector_shadowed(scene: Scene, rig: RectifiedRig, x: np.ndarray) -> bool:
    """True iff some scene surface lies strictly between ``x`` and the projector."""
    x = np.asarray(x, dtype=np.float64)
    to_proj = rig.projector_center - x
    dist = np.linalg.norm(to_proj)
    d = (to_proj / dist)[None, :]
    t, _, _ = _trace_rays(scene, x[None, :] + SHADOW_RAY_EPS * d, d)
    return bool(t[0] < dist - 2.0 * SHADOW_RAY_EPS)


# ---------------------------------------------------------------------------
# Full-frame rendering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleMeta:
    rig: RectifiedRig
    grid: WavelengthGrid
    pattern_width: int
    pattern_height: int
    pattern_seed: int
    scene_seed: int | None = None

    def to_dict(self) -> dict:
        return {"rig": self.rig.to_dict(),
                "grid": {"start_nm": self.grid.start_nm, "step_nm": self.grid.step_nm,
                         "band_count": self.grid.band_count},
                "pattern": {"width": self.pattern_width, "height": self.pattern_height,
                            "seed": self.pattern_seed},
                "scene_seed": self.scene_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SampleMeta":
        g = d["grid"]
        p = d["pattern"]
        return cls(rig=RectifiedRig.from_dict(d["rig"]),
                   grid=WavelengthGrid(g["start_nm"], g["step_nm"], g["band_count"]),
                   pattern_width=p["width"], pattern_height=p["height"],
                   pattern_seed=p["seed"], scene_seed=d.get("scene_seed"))


@dataclass(eq=False)
class Sample:
    """One rendered record: image + dense ground truth.

    ``disparity_gt``/``depth_gt`` are float64 and NaN on camera-ray misses;
    ``image_I`` is float32 and zero wherever ``mask_V`` is false;
    ``reflectance_gt`` is float32 in [0, 1] (zero on misses).
    """

    image_I: np.ndarray        # (H, W, 3) float32
    disparity_gt: np.ndarray   # (H, W) float64, px
    depth_gt: np.ndarray       # (H, W) float64, m
    reflectance_gt: np.ndarray # (H, W, N_lambda) float32
    mask_V: np.ndarray         # (H, W) bool
    meta: SampleMeta


@dataclass(eq=False)
class RenderAux:
    """Renderer-side truths that are not part of the Sample contract."""

    shading: np.ndarray    # (H, W) float64, 0 where unlit/miss
    labels: np.ndarray     # (H, W) int16 pattern label per pixel, -1 where none
    image_f64: np.ndarray  # (H, W, 3) float64 pre-quantization image


def render_scene(scene: Scene, rig: RectifiedRig, pattern: DotPattern,
                 primaries: ProjectorPrimaries, sensitivity: CameraSensitivity,
                 *, noise_sigma: float = 0.0, noise_seed: int | None = None,
                 scene_seed: int | None = None, return_aux: bool = False):
    """Render a Sample (and optionally a RenderAux) for one scene.

    Per pixel: trace the camera ray, convert depth to disparity, reproject
    into the projector for the pattern code, shade with inverse-square
    Lambertian falloff and integrate the per-band products into RGB.
    Shadowed, unlit and missed pixels render black with mask false.
    """
    if (rig.width, rig.height) != (pattern.width, pattern.height):
        raise ValueError("rig resolution must match the pattern resolution")
    if not (scene.grid == primaries.grid == sensitivity.grid):
        raise GridMismatchError("scene, primaries and sensitivity grids must agree")

    h, w = rig.height, rig.width
    dirs = _camera_directions(rig).reshape(-1, 3)
    t, normals, ridx = _trace_rays(scene, np.zeros_like(dirs), dirs)
    hit = np.isfinite(t)

    # orient normals toward the camera
    flip = np.sum(normals * dirs, axis=1) > 0.0
    normals[flip] = -normals[flip]

    depth = np.where(hit, t, np.nan)
    disparity = rig.baseline_m * rig.focal_px / depth

    pts = np.where(hit, t, 0.0)[:, None] * dirs

    # projector reprojection: rectified geometry makes it a pure u-shift
    cx, cy = rig.principal_point
    uu = np.tile(np.arange(w, dtype=np.float64), h)
    with np.errstate(invalid="ignore"):
        up = np.rint(uu - disparity)
    in_frustum = hit & np.isfinite(up) & (up >= 0) & (up <= pattern.width - 1)
    vp = np.repeat(np.arange(h, dtype=np.intp), w)
    labels = np.full(h * w, OUT_OF_FRUSTUM, dtype=np.int16)
    labels[in_frustum] = pattern.codes[vp[in_frustum],
                                       up[in_frustum].astype(np.intp)]

    # shading: inverse-square falloff times Lambertian cosine, clamped at 0
    to_proj = rig.projector_center[None, :] - pts
    dist = np.linalg.norm(to_proj, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosine = np.sum(to_proj * normals, axis=1) / dist
    shading = np.where(hit, np.maximum(cosine, 0.0) / (dist * dist), 0.0)

    # shadow rays from lit candidate pixels toward the projector
    shadowed = np.zeros(h * w, dtype=bool)
    cand = hit & in_frustum & (shading > 0.0)
    if np.any(cand):
        sdirs = to_proj[cand] / dist[cand, None]
        st, _, _ = _trace_rays(scene, pts[cand] + SHADOW_RAY_EPS * sdirs, sdirs)
        shadowed[cand] = st < dist[cand] - 2.0 * SHADOW_RAY_EPS

    mask = cand & ~shadowed

    refl_table = scene.reflectance_table()
    n_bands = scene.grid.band_count
    reflectance = np.zeros((h * w, n_bands))
    reflectance[hit] = refl_table[ridx[hit]]

    # RGB response: image[n] = s * sum_lambda c[n] * l_label * r.
    # einsum (optimize off) keeps the reduction single-threaded and
    # schedule-independent, so renders are bit-stable across thread counts.
    prim = primaries.as_matrix()
    image = np.zeros((h * w, 3))
    for lab in range(3):
        sel = mask & (labels == lab)
        if not np.any(sel):
            continue
        weights = sensitivity.channels * prim[lab]  # (3, N_lambda)
        image[sel] = shading[sel, None] * np.einsum("pl,nl->pn", reflectance[sel], weights)

    if noise_sigma > 0.0:
        rng = np.random.default_rng(noise_seed)
        image = np.maximum(image + rng.normal(0.0, noise_sigma, image.shape), 0.0)

    meta = SampleMeta(rig=rig, grid=scene.grid, pattern_width=pattern.width,
                      pattern_height=pattern.height, pattern_seed=pattern.seed,
                      scene_seed=scene_seed)
    sample = Sample(
        image_I=image.reshape(h, w, 3).astype(np.float32),
        disparity_gt=disparity.reshape(h, w),
        depth_gt=depth.reshape(h, w),
        reflectance_gt=reflectance.reshape(h, w, n_bands).astype(np.float32),
        mask_V=mask.reshape(h, w),
        meta=meta,
    )
    if not return_aux:
        return sample
    aux = RenderAux(shading=shading.reshape(h, w),
                    labels=labels.reshape(h, w),
                    image_f64=image.reshape(h, w, 3))
    return sample, aux


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------

def make_reflectance_corpus(count: int, grid: WavelengthGrid = DEFAULT_GRID,
                            seed: int = 0) -> list[Spectrum]:
    """Seeded smooth random reflectances: sums of 3 Gaussians clipped to [0, 1]."""
    if count < 1:
        raise ValueError("corpus count must be >= 1")
    rng = np.random.default_rng(seed)
    lam = grid.wavelengths()
    out = []
    for _ in range(count):
        v = np.zeros(grid.band_count)
        for _ in range(3):
            amp = rng.uniform(0.1, 0.9)
            center = rng.uniform(lam[0], lam[-1])
            width = rng.uniform(20.0, 90.0)
            v += amp * np.exp(-0.5 * ((lam - center) / width) ** 2)
        out.append(Spectrum.reflectance(grid, np.clip(v, 0.0, 1.0)))
    return out


def _unit_cube_mesh(reflectance: int = 0) -> TriangleMesh:
    v = np.array([[x, y, z] for z in (-0.5, 0.5) for y in (-0.5, 0.5)
                  for x in (-0.5, 0.5)], dtype=np.float64)
    f = np.array([
        [0, 1, 2], [1, 3, 2],   # z = -0.5
        [4, 6, 5], [5, 6, 7],   # z = +0.5
        [0, 2, 4], [2, 6, 4],   # x = -0.5
        [1, 5, 3], [3, 5, 7],   # x = +0.5
        [0, 4, 1], [1, 4, 5],   # y = -0.5
        [2, 3, 6], [3, 7, 6],   # y = +0.5
    ], dtype=np.intp)
    return TriangleMesh(v, f, reflectance)


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w_, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w_ * z), 2 * (x * z + w_ * y)],
        [2 * (x * y + w_ * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w_ * x)],
        [2 * (x * z - w_ * y), 2 * (y * z + w_ * x), 1 - 2 * (x * x + y * y)],
    ])


@dataclass
class DatasetConfig:
    """Parameters for seeded random scene/dataset generation."""

    scene_count: int
    rig: RectifiedRig
    corpus: list[Spectrum] = field(default_factory=list)
    sensitivity: CameraSensitivity | None = None
    primaries: ProjectorPrimaries | None = None
    grid: WavelengthGrid = DEFAULT_GRID
    depth_range: tuple[float, float] = (0.3, 1.0)
    objects_per_scene: tuple[int, int] = (1, 3)
    pattern_seed: int = 0
    master_seed: int = 0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.scene_count < 1:
            raise SceneConfigError("scene_count must be >= 1")
        zmin, zmax = self.depth_range
        if not (0.0 < zmin < zmax < np.inf):
            raise SceneConfigError(f"bad depth range {self.depth_range}")
        if self.objects_per_scene[0] < 0 or \
                self.objects_per_scene[0] > self.objects_per_scene[1]:
            raise SceneConfigError(f"bad objects_per_scene {self.objects_per_scene}")


def random_scene(config: DatasetConfig, rng: np.random.Generator) -> Scene:
    """One random scene: a backdrop plane plus floating spheres/cards/cubes.

    Placement keeps every surface depth inside the configured range (with
    the object extents already accounted for).
    """
    if not config.corpus:
        raise SceneConfigError("reflectance corpus is empty")
    zmin, zmax = config.depth_range
    span = zmax - zmin
    rig = config.rig
    n_refl = len(config.corpus)

    def rand_refl():
        return int(rng.integers(n_refl))

    objects = [Plane("z", float(rng.uniform(zmin + 0.75 * span, zmax - 0.02 * span)),
                     reflectance=rand_refl())]
    # lateral extent of the view frustum at depth z (with margin)
    half_w = 0.5 * rig.width / rig.focal_px
    half_h = 0.5 * rig.height / rig.focal_px
    n_obj = int(rng.integers(config.objects_per_scene[0], config.objects_per_scene[1] + 1))
    for _ in range(n_obj):
        zc = float(rng.uniform(zmin + 0.15 * span, zmin + 0.6 * span))
        x = float(rng.uniform(-0.6, 0.6) * half_w * zc)
        y = float(rng.uniform(-0.6, 0.6) * half_h * zc)
        kind = rng.integers(3)
        if kind == 0:
            radius = float(rng.uniform(0.05, 0.12) * span)
            objects.append(Sphere((x, y, zc), radius, reflectance=rand_refl()))
        elif kind == 1:
            hw = float(rng.uniform(0.05, 0.2) * half_w * zc)
            hh = float(rng.uniform(0.05, 0.2) * half_h * zc)
            objects.append(Plane("z", zc, reflectance=rand_refl(),
                                 bounds=((x - hw, x + hw), (y - hh, y + hh))))
        else:
            cube = _unit_cube_mesh(rand_refl())
            scale = float(rng.uniform(0.08, 0.2) * span)
            verts = cube.vertices * scale @ _random_rotation(rng).T + np.array([x, y, zc])
            objects.append(TriangleMesh(verts, cube.faces, cube.reflectance))
    return Scene(tuple(objects), tuple(config.corpus), grid=config.grid)


def generate_dataset(config: DatasetConfig) -> list[Sample]:
    """Render ``scene_count`` seeded random scenes; deterministic per master seed."""
    if not config.corpus:
        raise SceneConfigError("reflectance corpus is empty")
    sensitivity = config.sensitivity or default_sensitivity(config.grid)
    primaries = config.primaries or default_primaries(config.grid)
    pattern = generate_pattern(config.rig.width, config.rig.height, config.pattern_seed)
    seeds = np.random.SeedSequence(config.master_seed).spawn(config.scene_count)
    samples = []
    for i, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        scene = random_scene(config, rng)
        samples.append(render_scene(
            scene, config.rig, pattern, primaries, sensitivity,
            noise_sigma=config.noise_sigma, noise_seed=int(ss.generate_state(1)[0]),
            scene_seed=i))
    return samples


# ---------------------------------------------------------------------------
# Scene JSON (the CLI `render` input)
# ---------------------------------------------------------------------------

def _reflectances_from_json(entries, grid: WavelengthGrid, base: Path) -> tuple[Spectrum, ...]:
    out = []
    for item in entries:
        if "values" in item:
            out.append(Spectrum.reflectance(grid, np.asarray(item["values"], dtype=np.float64)))
        elif "csv" in item:
            from .spectral import load_spectrum_csv
            out.append(load_spectrum_csv(base / item["csv"], grid, kind="reflectance"))
        else:
            raise SceneConfigError(f"reflectance entry needs 'values' or 'csv': {item}")
    return tuple(out)


def scene_from_json(path) -> tuple[Scene, RectifiedRig, DotPattern,
                                   ProjectorPrimaries, CameraSensitivity, dict]:
    """Load a scene description; returns everything render_scene needs."""
    path = Path(path)
    cfg = json.loads(path.read_text())
    if cfg.get("format") != 1:
        raise SceneConfigError(f"{path}: unsupported scene format {cfg.get('format')!r}")
    g = cfg.get("grid", {})
    grid = WavelengthGrid(g.get("start_nm", 410.0), g.get("step_nm", 10.0),
                          g.get("band_count", 27))
    rig = RectifiedRig.from_dict(cfg["rig"])
    p = cfg["pattern"]
    pattern = generate_pattern(p.get("width", rig.width), p.get("height", rig.height),
                               p["seed"])
    base = path.parent
    sens_cfg = cfg.get("sensitivity", "default")
    sensitivity = default_sensitivity(grid) if sens_cfg == "default" \
        else load_sensitivity_csv(base / sens_cfg["csv"], grid)
    prim_cfg = cfg.get("primaries", "default")
    primaries = default_primaries(grid) if prim_cfg == "default" \
        else load_primaries_csv(base / prim_cfg["csv"], grid)

    refl_cfg = cfg.get("reflectances")
    if refl_cfg is not None:
        reflectances = _reflectances_from_json(refl_cfg, grid, base)
    elif "corpus" in cfg and "csv" in cfg["corpus"]:
        reflectances = tuple(load_spectra_csv(base / cfg["corpus"]["csv"], grid))
    elif "corpus" in cfg and "random" in cfg["corpus"]:
        rc = cfg["corpus"]["random"]
        reflectances = tuple(make_reflectance_corpus(rc["count"], grid, rc.get("seed", 0)))
    else:
        raise SceneConfigError(f"{path}: needs 'reflectances' or 'corpus'")

    objects = []
    for obj in cfg["objects"]:
        kind = obj["type"]
        if kind == "plane":
            bounds = obj.get("bounds")
            if bounds is not None:
                bounds = ((bounds[0][0], bounds[0][1]), (bounds[1][0], bounds[1][1]))
            objects.append(Plane(obj["axis"], obj["offset"],
                                 reflectance=obj.get("reflectance", 0), bounds=bounds))
        elif kind == "sphere":
            objects.append(Sphere(tuple(obj["center"]), obj["radius"],
                                  reflectance=obj.get("reflectance", 0)))
        elif kind == "mesh":
            objects.append(load_mesh(base / obj["path"], obj.get("reflectance", 0)))
        else:
            raise SceneConfigError(f"{path}: unknown object type {kind!r}")
    scene = Scene(tuple(objects), reflectances, grid=grid)
    extras = {"noise_sigma": cfg.get("noise_sigma", 0.0), "seed": cfg.get("seed")}
    return scene, rig, pattern, primaries, sensitivity, extras
