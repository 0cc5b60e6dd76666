"""Imaging operators and the loss landscape.

Shows LCN isolating the dot pattern from shading, and how the smooth
Census pattern loss punishes disparity misalignment, which is the signal
a disparity estimator trains on.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import chromadot as cd
from chromadot import imageops, losses

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

grid = cd.DEFAULT_GRID
rig = cd.RectifiedRig(0.1, 300.0, (160.0, 120.0), 320, 240, max_disparity_px=128.0)
pattern = cd.generate_pattern(rig.width, rig.height, seed=21)
corpus = cd.make_reflectance_corpus(4, grid, seed=2)
scene = cd.Scene((cd.Plane("z", 0.6), cd.Sphere((0.0, 0.02, 0.42), 0.07, 1)),
                 tuple(corpus), grid=grid)
sample = cd.render_scene(scene, rig, pattern, cd.default_primaries(grid),
                         cd.default_sensitivity(grid))

i_lcn = imageops.lcn(sample.image_I.astype(np.float64))
print("LCN output mean/std on lit pixels:",
      f"{i_lcn[sample.mask_V].mean():.4f} / {i_lcn[sample.mask_V].std():.3f}")

# the loss landscape around the true disparity
mask = sample.mask_V & np.isfinite(sample.disparity_gt)
pm = pattern.pm_image()
offsets = np.linspace(-8, 8, 33)
landscape = [losses.loss_pattern(i_lcn, pm, sample.disparity_gt + o, mask)
             for o in offsets]
best = offsets[int(np.argmin(landscape))]
print(f"pattern loss minimized at offset {best:+.2f} px (truth: 0)")

report = losses.total_loss(sample, sample.disparity_gt,
                           sample.reflectance_gt.astype(np.float64))
print("perfect-prediction report:", report)

fig, axes = plt.subplots(1, 3, figsize=(13, 3.5))
axes[0].imshow(np.clip(i_lcn * 0.25 + 0.5, 0, 1))
axes[0].set_title("LCN image (rescaled)")
axes[0].set_axis_off()
warped = imageops.warp_by_disparity(pm, sample.disparity_gt)
axes[1].imshow(np.clip(warped * 0.5 + 0.5, 0, 1))
axes[1].set_title("pattern warped to camera view")
axes[1].set_axis_off()
axes[2].plot(offsets, landscape)
axes[2].axvline(0.0, color="k", lw=0.8, ls="--")
axes[2].set_xlabel("disparity offset [px]")
axes[2].set_ylabel("pattern loss")
axes[2].set_title("alignment landscape")
fig.tight_layout()
fig.savefig(out_dir / "loss_landscape.png", dpi=110)
print("figure written to", out_dir / "loss_landscape.png")
