"""Dataset generation, evaluation metrics and point-cloud export.

Generates a small seeded dataset of random scenes, scores a deliberately
imperfect "prediction" with the depth/reflectance metrics, and exports a
colored point cloud.
"""

from pathlib import Path

import numpy as np

import chromadot as cd
from chromadot import evalio

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

grid = cd.DEFAULT_GRID
rig = cd.RectifiedRig(0.1, 150.0, (80.0, 60.0), 160, 120, max_disparity_px=64.0)
config = cd.DatasetConfig(
    scene_count=4,
    rig=rig,
    corpus=cd.make_reflectance_corpus(24, grid, seed=5),
    depth_range=(0.3, 1.0),
    objects_per_scene=(1, 3),
    pattern_seed=3,
    master_seed=2024,
)
samples = cd.generate_dataset(config)
for i, s in enumerate(samples):
    z = s.depth_gt[np.isfinite(s.depth_gt)]
    print(f"scene {i}: lit {s.mask_V.mean() * 100:5.1f}%  "
          f"depth {z.min():.2f}-{z.max():.2f} m")

# score a corrupted copy of the ground truth
sample = samples[0]
rng = np.random.default_rng(0)
mask = sample.mask_V & np.isfinite(sample.depth_gt)
z_hat = sample.depth_gt * rng.uniform(0.98, 1.06, sample.depth_gt.shape)
r_hat = np.clip(sample.reflectance_gt
                + rng.normal(0, 0.02, sample.reflectance_gt.shape), 0, 1)
metrics = evalio.evaluate(np.where(mask, z_hat, 1.0), sample.depth_gt,
                          r_hat, sample.reflectance_gt, mask)
print("depth RMSE [m]:", round(metrics.depth_rmse, 4))
print("theta_1/2/3 [%]:", [round(t, 1) for t in metrics.theta])
print("refl RMSE:", round(metrics.refl_rmse, 4), " MRAE:", round(metrics.mrae, 4))

# colored point cloud of the ground truth
srgb = evalio.reflectance_to_srgb(sample.reflectance_gt.astype(np.float64), grid)
ply = evalio.export_point_cloud(sample.depth_gt, rig, srgb, mask)
(out_dir / "scene0.ply").write_text(ply)
print("point cloud written to", out_dir / "scene0.ply")
