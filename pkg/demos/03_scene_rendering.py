"""Rendering a scene into a training/eval sample.

Builds a small scene (backdrop plane + sphere + floating card), renders
the color-dot image with full ground truth, and writes both the on-disk
record and a quick-look visualization.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import chromadot as cd
from chromadot import evalio

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

grid = cd.DEFAULT_GRID
rig = cd.RectifiedRig(baseline_m=0.1, focal_px=300.0, principal_point=(160.0, 120.0),
                      width=320, height=240, max_disparity_px=128.0)
corpus = cd.make_reflectance_corpus(6, grid, seed=11)
scene = cd.Scene(
    objects=(
        cd.Plane("z", 0.9, reflectance=0),
        cd.Sphere((0.04, 0.0, 0.55), 0.09, reflectance=1),
        cd.Plane("z", 0.45, reflectance=2, bounds=((-0.14, -0.05), (-0.08, 0.02))),
    ),
    reflectances=tuple(corpus),
    grid=grid,
)
pattern = cd.generate_pattern(rig.width, rig.height, seed=5)
sample = cd.render_scene(scene, rig, pattern, cd.default_primaries(grid),
                         cd.default_sensitivity(grid))

valid = sample.mask_V
print(f"lit pixels: {valid.mean() * 100:.1f}%")
print(f"disparity range: {np.nanmin(sample.disparity_gt):.1f}"
      f" .. {np.nanmax(sample.disparity_gt):.1f} px")

# persist as a sample record (16-bit PNG + binary planes + meta)
record = evalio.SampleRecord.from_sample(sample)
evalio.save_sample(out_dir / "sample", record)
print("record written to", out_dir / "sample")

fig, axes = plt.subplots(1, 3, figsize=(13, 3.5))
img = sample.image_I / max(sample.image_I.max(), 1e-9)
axes[0].imshow(np.power(np.clip(img, 0, 1), 1 / 2.2))
axes[0].set_title("color-dot image")
d = axes[1].imshow(sample.disparity_gt, cmap="turbo")
axes[1].set_title("disparity ground truth [px]")
fig.colorbar(d, ax=axes[1], shrink=0.8)
axes[2].imshow(evalio.reflectance_to_srgb(sample.reflectance_gt, grid))
axes[2].set_title("reflectance ground truth (sRGB)")
for ax in axes:
    ax.set_axis_off()
fig.tight_layout()
fig.savefig(out_dir / "scene_rendering.png", dpi=110)
print("figure written to", out_dir / "scene_rendering.png")
