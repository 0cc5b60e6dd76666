"""End-to-end training of the two-network pipeline.

Stage one estimates disparity from the image + its LCN; depth follows as
Z = b*f / D.  Stage two estimates the reflectance cube from the image, the
estimated depth and the illumination spectrum warped from the projector
view by the estimated disparity.  Because the warp and the depth both
depend on D, reflectance errors back-propagate into the disparity network,
which is the point of joint training.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import ops
from .losses import LossReport, LossWeights, total_loss
from .model import DEFAULT_WIDTHS, build_networks
from .records import Dataset, load_dataset

CHECKPOINT_FORMAT = 1


@dataclass
class TrainConfig:
    steps: int = 500
    epochs: int | None = None  # when set, overrides steps as epochs * batches/epoch
    batch_size: int = 4
    learning_rate: float = 1e-4
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    widths: tuple = DEFAULT_WIDTHS

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("hyperparameters must be positive (steps may be 0)")
        if self.epochs is not None and self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    def total_steps(self, sample_count: int) -> int:
        if self.epochs is None:
            return self.steps
        batches = -(-sample_count // self.batch_size)
        return self.epochs * batches


@dataclass
class Batch:
    image: torch.Tensor        # (B, 3, H, W)
    disparity: torch.Tensor    # (B, H, W)
    reflectance: torch.Tensor  # (B, bands, H, W)
    valid: torch.Tensor        # (B, H, W) bool
    finite: torch.Tensor       # (B, H, W) bool


def batch_from_samples(samples, dtype=torch.float32) -> Batch:
    def chw(stack):
        return torch.from_numpy(np.stack(stack)).permute(0, 3, 1, 2).to(dtype)

    return Batch(
        image=chw([s.image for s in samples]),
        disparity=torch.from_numpy(np.stack([s.disparity for s in samples])).to(dtype),
        reflectance=chw([s.reflectance for s in samples]),
        valid=torch.from_numpy(np.stack([s.valid for s in samples])),
        finite=torch.from_numpy(np.stack([s.finite for s in samples])),
    )


class Pipeline:
    """The two networks plus the fixed warping/conversion stages."""

    def __init__(self, dataset: Dataset, widths=DEFAULT_WIDTHS):
        self.rig = dataset.rig
        self.bf = float(dataset.rig["baseline_m"]) * float(dataset.rig["focal_px"])
        self.disparity_net, self.spectral_net = build_networks(
            dataset.max_disparity, dataset.band_count, widths)
        self.illumination = torch.from_numpy(dataset.illumination_cube()).unsqueeze(0)
        self.pattern_pm = torch.from_numpy(dataset.pattern_pm()).unsqueeze(0)

    def parameters(self):
        yield from self.disparity_net.parameters()
        yield from self.spectral_net.parameters()

    def forward(self, image: torch.Tensor):
        """image (B, 3, H, W) -> (d_hat, z_hat, warped_illumination, r_hat)."""
        i_lcn = ops.lcn(image)
        d_hat = self.disparity_net(torch.cat([image, i_lcn], dim=1)).squeeze(1)
        z_hat = self.bf / d_hat
        l_pat = self.illumination.to(image.dtype).expand(image.shape[0], -1, -1, -1)
        warped, _ = ops.warp_by_disparity(l_pat, d_hat)
        r_hat = self.spectral_net(torch.cat([image, z_hat.unsqueeze(1), warped], dim=1))
        return d_hat, z_hat, warped, r_hat

    def losses(self, batch: Batch, d_hat, r_hat,
               weights: LossWeights) -> LossReport:
        i_lcn = ops.lcn(batch.image)
        pm = self.pattern_pm.to(batch.image.dtype).expand(batch.image.shape[0],
                                                          -1, -1, -1)
        return total_loss(d_hat, r_hat, i_lcn, pm, batch.disparity,
                          batch.reflectance, batch.valid, weights,
                          finite_disparity=batch.finite)


def train(dataset_path, config: TrainConfig, out_dir,
          log_every: int = 1) -> dict:
    """Train on a rendered dataset; writes loss JSONL + a checkpoint.

    Returns a summary dict with the first/last logged totals.
    """
    torch.manual_seed(config.seed)
    dataset = load_dataset(dataset_path)
    pipeline = Pipeline(dataset, widths=config.widths)
    optimizer = torch.optim.Adam(pipeline.parameters(), lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "losses.jsonl"
    first_total = last_total = None
    n_steps = config.total_steps(len(dataset.samples))
    with open(log_path, "w") as log:
        for step in range(n_steps):
            idx = rng.choice(len(dataset.samples),
                             size=min(config.batch_size, len(dataset.samples)),
                             replace=False)
            batch = batch_from_samples([dataset.samples[i] for i in idx])
            d_hat, z_hat, _, r_hat = pipeline.forward(batch.image)
            report = pipeline.losses(batch, d_hat, r_hat, config.weights)
            optimizer.zero_grad()
            report.total.backward()
            optimizer.step()
            if step % log_every == 0 or step == n_steps - 1:
                entry = {"step": step, **report.detached()}
                log.write(json.dumps(entry, sort_keys=True) + "\n")
                last_total = entry["total"]
                if first_total is None:
                    first_total = entry["total"]

    ckpt_path = out_dir / "checkpoint.pt"
    save_checkpoint(ckpt_path, pipeline, config, dataset)
    return {"steps": n_steps, "first_total": first_total,
            "last_total": last_total, "checkpoint": str(ckpt_path),
            "log": str(log_path)}


def save_checkpoint(path, pipeline: Pipeline, config: TrainConfig,
                    dataset: Dataset) -> None:
    torch.save({
        "format": CHECKPOINT_FORMAT,
        "disparity_net": pipeline.disparity_net.state_dict(),
        "spectral_net": pipeline.spectral_net.state_dict(),
        "config": {"steps": config.steps, "epochs": config.epochs,
                   "batch_size": config.batch_size,
                   "learning_rate": config.learning_rate, "seed": config.seed,
                   "weights": asdict(config.weights),
                   "widths": list(config.widths)},
        "rig": dataset.rig,
        "band_count": dataset.band_count,
    }, path)


def load_checkpoint(path, dataset: Dataset) -> tuple[Pipeline, dict]:
    payload = torch.load(path, weights_only=True)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format")
    pipeline = Pipeline(dataset, widths=tuple(payload["config"]["widths"]))
    pipeline.disparity_net.load_state_dict(payload["disparity_net"])
    pipeline.spectral_net.load_state_dict(payload["spectral_net"])
    pipeline.disparity_net.eval()
    pipeline.spectral_net.eval()
    return pipeline, payload["config"]
