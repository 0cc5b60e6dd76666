"""Command-line interface.

Subcommands: gen-pattern, render, render-dataset, eval, recon-basis,
condnum, export-ply.  Results are pure functions of inputs, flags and
seeds; errors print a single machine-parsable JSON line to stderr and
exit nonzero (unknown commands/flags exit 2 with usage).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import basis as basis_mod
from . import evalio, losses
from .pattern import generate_pattern, load_pattern, save_pattern
from .render import (
    DatasetConfig,
    RectifiedRig,
    generate_dataset,
    make_reflectance_corpus,
    render_scene,
    scene_from_json,
)
from .spectral import (
    WavelengthGrid,
    default_primaries,
    default_sensitivity,
    load_primaries_csv,
    load_sensitivity_csv,
    load_spectra_csv,
    save_primaries_csv,
    save_sensitivity_csv,
    save_spectra_csv,
)


def _round6(x: float) -> float:
    return float(f"{x:.6g}")


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _grid_from_args(args) -> WavelengthGrid:
    return WavelengthGrid()


def _load_sensitivity(arg, grid):
    return default_sensitivity(grid) if arg == "default" else load_sensitivity_csv(arg, grid)


def _load_primaries(arg, grid):
    return default_primaries(grid) if arg == "default" else load_primaries_csv(arg, grid)


def _cmd_gen_pattern(args) -> int:
    pattern = generate_pattern(args.width, args.height, args.seed)
    save_pattern(args.out, pattern)
    return 0


def _cmd_render(args) -> int:
    scene, rig, pattern, primaries, sensitivity, extras = scene_from_json(args.scene)
    if args.pattern:
        pattern = load_pattern(args.pattern)
    sample, aux = render_scene(scene, rig, pattern, primaries, sensitivity,
                               noise_sigma=extras.get("noise_sigma", 0.0),
                               noise_seed=extras.get("seed"), return_aux=True)
    record = evalio.SampleRecord.from_sample(sample)
    evalio.save_sample(args.out, record)
    # auxiliary renderer truths, useful for known-shading reconstruction
    evalio.save_planes(Path(args.out) / "shading.bin", aux.shading.astype(np.float32))
    return 0


def _cmd_render_dataset(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    if cfg.get("format") != 1:
        raise ValueError(f"{args.config}: unsupported config format")
    grid = WavelengthGrid(**cfg.get("grid", {"start_nm": 410.0, "step_nm": 10.0,
                                             "band_count": 27}))
    rig = RectifiedRig.from_dict(cfg["rig"])
    corpus_cfg = cfg.get("corpus", {"random": {"count": 24, "seed": 0}})
    if "csv" in corpus_cfg:
        corpus = load_spectra_csv(Path(args.config).parent / corpus_cfg["csv"], grid)
    else:
        rc = corpus_cfg["random"]
        corpus = make_reflectance_corpus(rc["count"], grid, rc.get("seed", 0))
    sensitivity = _load_sensitivity(cfg.get("sensitivity", "default"), grid)
    primaries = _load_primaries(cfg.get("primaries", "default"), grid)
    config = DatasetConfig(
        scene_count=cfg["scene_count"], rig=rig, corpus=corpus,
        sensitivity=sensitivity, primaries=primaries, grid=grid,
        depth_range=tuple(cfg.get("depth_range", (0.3, 1.0))),
        objects_per_scene=tuple(cfg.get("objects_per_scene", (1, 3))),
        pattern_seed=cfg.get("pattern_seed", 0),
        master_seed=cfg.get("master_seed", args.seed or 0),
        noise_sigma=cfg.get("noise_sigma", 0.0),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pattern = generate_pattern(rig.width, rig.height, config.pattern_seed)
    save_pattern(out / "pattern.png", pattern)
    save_sensitivity_csv(out / "sensitivity.csv", sensitivity)
    save_primaries_csv(out / "primaries.csv", primaries)
    save_spectra_csv(out / "corpus.csv", corpus)
    sample_dirs = []
    for i, sample in enumerate(generate_dataset(config)):
        name = f"sample_{i:04d}"
        evalio.save_sample(out / name, evalio.SampleRecord.from_sample(sample))
        sample_dirs.append(name)
    manifest = {"format": 1, "scene_count": config.scene_count,
                "rig": rig.to_dict(),
                "grid": {"start_nm": grid.start_nm, "step_nm": grid.step_nm,
                         "band_count": grid.band_count},
                "pattern": {"width": rig.width, "height": rig.height,
                            "seed": config.pattern_seed},
                "samples": sample_dirs,
                "files": {"pattern": "pattern.png", "sensitivity": "sensitivity.csv",
                          "primaries": "primaries.csv", "corpus": "corpus.csv"}}
    (out / "dataset.json").write_text(json.dumps(manifest, sort_keys=True) + "\n")
    return 0


def _cmd_eval(args) -> int:
    gt = evalio.load_sample(args.gt)
    sample = gt.to_sample()
    pred_dir = Path(args.pred)
    d_hat = evalio.load_planes(pred_dir / "disparity.bin")[0].astype(np.float64)
    r_hat = np.moveaxis(evalio.load_planes(pred_dir / "reflectance.bin"), 0, 2)
    rig = sample.meta.rig
    depth_path = pred_dir / "depth.bin"
    if depth_path.exists():
        z_hat = evalio.load_planes(depth_path)[0].astype(np.float64)
    else:
        z_hat = rig.baseline_m * rig.focal_px / d_hat
    mask = sample.mask_V & np.isfinite(sample.disparity_gt)
    metrics = evalio.evaluate(z_hat, sample.depth_gt, r_hat.astype(np.float64),
                              sample.reflectance_gt.astype(np.float64), mask)
    weights = losses.LossWeights(w_de=args.w_de, w_p=args.w_p, w_r=args.w_r,
                                 w_re=args.w_re)
    report = losses.total_loss(sample, d_hat, r_hat.astype(np.float64), weights)
    _emit({"format": 1, "metrics": metrics.to_dict(),
           "losses": report.to_dict(),
           "weights": {"w_de": weights.w_de, "w_p": weights.w_p,
                       "w_r": weights.w_r, "w_re": weights.w_re},
           "units": {"depth_rmse": "m"}}, args.out)
    return 0


def _corpus_for_basis(args, grid):
    if args.corpus:
        return load_spectra_csv(args.corpus, grid)
    return make_reflectance_corpus(64, grid, seed=0)


def _cmd_recon_basis(args) -> int:
    record = evalio.load_sample(args.sample)
    sample = record.to_sample()
    grid = sample.meta.grid
    sensitivity = _load_sensitivity(args.sensitivity, grid)
    primaries = _load_primaries(args.primaries, grid)
    m = basis_mod.build_system_matrix(sensitivity, primaries)
    if args.basis:
        model = basis_mod.load_basis_csv(args.basis, grid)
    else:
        model = basis_mod.fit_basis(_corpus_for_basis(args, grid), args.k)
    pattern = generate_pattern(sample.meta.pattern_width, sample.meta.pattern_height,
                               sample.meta.pattern_seed)
    shading = None
    shading_path = Path(args.sample) / "shading.bin"
    if args.shading == "auto" and shading_path.exists():
        shading = evalio.load_planes(shading_path)[0].astype(np.float64)
    elif args.shading not in ("auto", "joint"):
        shading = evalio.load_planes(args.shading)[0].astype(np.float64)
    result = basis_mod.reconstruct_image(
        sample.image_I.astype(np.float64), sample.disparity_gt, pattern, m, model,
        mask=sample.mask_V, shading=shading, smoothness_weight=args.weight)
    cube = np.where(result.valid[..., None], result.reflectance, 0.0)
    evalio.save_planes(args.out, np.moveaxis(cube.astype(np.float32), 2, 0))
    evalio.save_mask(Path(args.out).with_suffix(".mask.bin"), result.valid)
    _emit({"format": 1, "out": str(args.out),
           "valid_fraction": _round6(float(np.mean(result.valid))),
           "low_confidence_fraction": _round6(float(np.mean(result.low_confidence))),
           "k": model.k}, None)
    return 0


def _cmd_condnum(args) -> int:
    grid = _grid_from_args(args)
    sensitivity = _load_sensitivity(args.sensitivity, grid)
    primaries = _load_primaries(args.primaries, grid)
    m = basis_mod.build_system_matrix(sensitivity, primaries)
    model = basis_mod.fit_basis(_corpus_for_basis(args, grid), args.k)
    raw = basis_mod.condition_number(m)
    if args.weight is None:
        weight, reduced = basis_mod.sweep_smoothness(m, model)
    else:
        weight, reduced = args.weight, basis_mod.condition_number_reduced(m, model,
                                                                          args.weight)
    _emit({"format": 1, "raw": _round6(raw), "reduced": _round6(reduced),
           "k": model.k, "weight": _round6(weight),
           "rank": int(np.linalg.matrix_rank(m))}, args.out)
    return 0


def _cmd_export_ply(args) -> int:
    record = evalio.load_sample(args.sample)
    sample = record.to_sample()
    if args.pred:
        cube = np.moveaxis(evalio.load_planes(args.pred), 0, 2).astype(np.float64)
    else:
        cube = sample.reflectance_gt.astype(np.float64)
    srgb = evalio.reflectance_to_srgb(cube, sample.meta.grid)
    mask = sample.mask_V & np.isfinite(sample.depth_gt)
    ply = evalio.export_point_cloud(sample.depth_gt, sample.meta.rig, srgb, mask)
    Path(args.out).write_text(ply)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chromadot",
                                     description="Color-dot projection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-pattern", help="generate a color-dot pattern PNG")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_pattern)

    p = sub.add_parser("render", help="render a scene JSON into a sample record")
    p.add_argument("--scene", required=True)
    p.add_argument("--pattern", help="pattern PNG overriding the scene's pattern")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("render-dataset", help="render a seeded random dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render_dataset)

    p = sub.add_parser("eval", help="metrics + losses of predictions vs ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    p.add_argument("--w-de", type=float, default=100.0)
    p.add_argument("--w-p", type=float, default=0.2)
    p.add_argument("--w-r", type=float, default=1.0)
    p.add_argument("--w-re", type=float, default=8.0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("recon-basis", help="basis-model spectral reconstruction")
    p.add_argument("--sample", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--basis", help="basis CSV (mean row + K basis rows)")
    p.add_argument("--corpus", help="corpus CSV used to fit the basis")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--weight", type=float, default=None,
                   help="smoothness weight (default: adaptive)")
    p.add_argument("--shading", default="auto",
                   help="'auto', 'joint' or a shading plane file")
    p.add_argument("--sensitivity", default="default")
    p.add_argument("--primaries", default="default")
    p.set_defaults(func=_cmd_recon_basis)

    p = sub.add_parser("condnum", help="system-matrix conditioning analysis")
    p.add_argument("--sensitivity", default="default")
    p.add_argument("--primaries", default="default")
    p.add_argument("--corpus", help="corpus CSV used to fit the basis")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--weight", type=float, default=None,
                   help="smoothness weight (default: best of a sweep)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_condnum)

    p = sub.add_parser("export-ply", help="export a colored point cloud")
    p.add_argument("--sample", required=True)
    p.add_argument("--pred", help="reflectance cube plane file to color with")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_ply)
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
