"""Trainer CLI.

    dottrainer train --dataset ds/ --out run/ [--steps N --batch-size B
                     --learning-rate LR --seed S --width-scale F]
    dottrainer dump-predictions --dataset ds/ --out pred/ [--checkpoint ckpt]
                     [--sample-index I --seed S]

`dump-predictions` writes disparity.bin / reflectance.bin plane files in
the renderer's format, so its outputs feed straight into `chromadot eval`.
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np
import torch

from .losses import LossWeights
from .model import DEFAULT_WIDTHS
from .records import load_dataset
from .train import Pipeline, TrainConfig, batch_from_samples, load_checkpoint, train

_HEADER = struct.Struct("<4sIII")


def write_planes(path, data: np.ndarray) -> None:
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    planes, h, w = arr.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(b"CDF1", w, h, planes))
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def scaled_widths(scale: float) -> tuple:
    return tuple(max(4, int(round(w * scale))) for w in DEFAULT_WIDTHS)


def _cmd_train(args) -> int:
    config = TrainConfig(steps=args.steps, epochs=args.epochs,
                         batch_size=args.batch_size,
                         learning_rate=args.learning_rate, seed=args.seed,
                         weights=LossWeights(w_de=args.w_de, w_p=args.w_p,
                                             w_r=args.w_r, w_re=args.w_re),
                         widths=scaled_widths(args.width_scale))
    summary = train(args.dataset, config, args.out)
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0


def _cmd_dump_predictions(args) -> int:
    dataset = load_dataset(args.dataset)
    torch.manual_seed(args.seed)
    if args.checkpoint:
        pipeline, _ = load_checkpoint(args.checkpoint, dataset)
    else:
        pipeline = Pipeline(dataset, widths=scaled_widths(args.width_scale))
    batch = batch_from_samples([dataset.samples[args.sample_index]])
    with torch.no_grad():
        d_hat, z_hat, _, r_hat = pipeline.forward(batch.image)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_planes(out / "disparity.bin", d_hat[0].numpy())
    write_planes(out / "depth.bin", z_hat[0].numpy())
    write_planes(out / "reflectance.bin", r_hat[0].numpy())
    sys.stdout.write(json.dumps({"out": str(out),
                                 "sample_index": args.sample_index}) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dottrainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the two-network pipeline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--epochs", type=int, default=None,
                   help="overrides --steps as epochs * batches per epoch")
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width-scale", type=float, default=1.0)
    p.add_argument("--w-de", type=float, default=100.0)
    p.add_argument("--w-p", type=float, default=0.2)
    p.add_argument("--w-r", type=float, default=1.0)
    p.add_argument("--w-re", type=float, default=8.0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("dump-predictions",
                       help="run the pipeline on one sample, write plane files")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--sample-index", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width-scale", type=float, default=1.0)
    p.set_defaults(func=_cmd_dump_predictions)
    return parser


def cli_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
