"""Command-line entry point.

Subcommands: ``simulate`` (target + masks -> measurement stack on disk),
``reconstruct`` (stack -> field), ``evaluate`` (field vs truth -> metrics),
``segment`` (image -> labels + count), ``bench`` (full sweep), ``masks``
(generate and save a mask set). Every subcommand accepts ``--config``,
``--seed``, ``--out``, and ``--threads``; the thread count only affects wall
time, never numeric results.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .bench import StageError, run_experiment
from .config import (ALGO_NAMES, ExperimentConfig, load_config, save_config)
from .errors import ConfigError
from .grids import ComplexField
from .masks import load_mask_set, save_mask_set
from .measurements import (add_gaussian_noise, add_poisson_noise, load_stack,
                           save_stack, simulate_measurements)
from .metrics import evaluate_field
from .segmentation import (count_cells, save_label_overlay_png, save_label_png,
                           watershed_segment)
from .solver import reconstruct


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="experiment configuration file")
    common.add_argument("--seed", type=int, metavar="N",
                        help="override the configured root seed")
    common.add_argument("--out", metavar="DIR",
                        help="override the configured output directory")
    common.add_argument("--threads", type=int, metavar="N",
                        help="worker count (wall time only, never results)")

    parser = argparse.ArgumentParser(
        prog="wavesr",
        description="Complex-field super-resolution from binned intensity "
                    "measurements: simulation, reconstruction, and analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common],
                   help="synthesize a measurement stack from the config")

    p_rec = sub.add_parser("reconstruct", parents=[common],
                           help="reconstruct a field from a saved stack")
    p_rec.add_argument("--algo", choices=ALGO_NAMES, default="conv",
                       help="reconstruction algorithm (prior selection)")
    p_rec.add_argument("--stack", metavar="DIR", required=True,
                       help="directory produced by the simulate subcommand")

    p_eval = sub.add_parser("evaluate", parents=[common],
                            help="score a reconstruction against ground truth")
    p_eval.add_argument("--recon", metavar="PATH", required=True,
                        help="reconstructed field dump (.f64)")
    p_eval.add_argument("--truth", metavar="PATH", required=True,
                        help="ground-truth field dump (.f64)")

    p_seg = sub.add_parser("segment", parents=[common],
                           help="segment and count cells in an image")
    p_seg.add_argument("--image", metavar="PATH", required=True,
                       help="input image (.png grayscale or .f64 dump)")
    p_seg.add_argument("--min-distance", type=int, default=7, metavar="PX",
                       help="minimum marker separation in pixels")
    p_seg.add_argument("--threshold", default="otsu", metavar="T",
                       help="'otsu' or a fixed numeric threshold")
    p_seg.add_argument("--keep-margin", action="store_true",
                       help="count cells touching the image border too")

    p_bench = sub.add_parser("bench", parents=[common],
                             help="run the configured benchmark sweep")
    p_bench.add_argument("--timing", action="store_true",
                         help="fill wall-time columns (outputs then vary "
                              "run-to-run)")

    sub.add_parser("masks", parents=[common],
                   help="generate and save the configured mask set")
    return parser


def _load_cfg(args) -> tuple[ExperimentConfig, Path | None]:
    if args.config:
        cfg = load_config(args.config)
        base = Path(args.config).parent
    else:
        cfg = ExperimentConfig()
        base = None
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    if args.threads is not None:
        cfg = dataclasses.replace(cfg, bench_threads=args.threads)
    return cfg, base


def _apply_noise(cfg: ExperimentConfig, stack):
    seed = cfg.noise_seed if cfg.noise_seed is not None else cfg.seed
    if cfg.noise_kind == "poisson":
        return add_poisson_noise(stack, cfg.noise_photon_level, seed)
    if cfg.noise_kind == "gaussian":
        return add_gaussian_noise(stack, cfg.noise_snr_db, seed,
                                  clamp=cfg.noise_clamp)
    return stack


def _cmd_simulate(args) -> int:
    cfg, base = _load_cfg(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    optics = cfg.optical_config()
    target = cfg.make_target(base_dir=base)
    masks = cfg.make_masks()
    stack = _apply_noise(cfg, simulate_measurements(target, masks, optics))
    save_config(cfg, out / "config.txt")
    fileio.save_grid(target, out / "truth.f64")
    save_mask_set(masks, out / "masks")
    save_stack(stack, out / "stack")
    if cfg.output_pngs:
        fileio.export_amplitude_png(target, out / "target_amplitude.png")
        fileio.export_phase_png(target, out / "target_phase.png")
    print(f"wrote {len(stack)} frames of {stack.shape[0]}x{stack.shape[1]} "
          f"(noise: {stack.noise_kind}) to {out}")
    return 0


def _cmd_reconstruct(args) -> int:
    stack_dir = Path(args.stack)
    if args.config:
        cfg, _ = _load_cfg(args)
    elif (stack_dir / "config.txt").is_file():
        cfg = load_config(stack_dir / "config.txt")
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
    else:
        raise ConfigError(f"no --config given and {stack_dir}/config.txt missing")
    stack = load_stack(stack_dir / "stack")
    masks = load_mask_set(stack_dir / "masks")
    theta = masks.shape[0] // stack.shape[0]
    optics = cfg.optical_config(theta)
    truth = None
    truth_path = stack_dir / "truth.f64"
    if truth_path.is_file():
        loaded = fileio.load_grid(truth_path)
        if isinstance(loaded, ComplexField):
            truth = loaded
    out = Path(args.out) if args.out else stack_dir / f"recon_{args.algo}"
    out.mkdir(parents=True, exist_ok=True)
    denoiser = cfg.make_denoiser(args.algo)
    result = reconstruct(stack, masks, optics, cfg.recon_config(),
                         denoiser=denoiser, truth=truth, output_dir=out)
    fileio.save_grid(result.field, out / "recon.f64")
    if cfg.output_pngs:
        fileio.export_amplitude_png(result.field, out / "amplitude.png")
        fileio.export_phase_png(result.field, out / "phase.png")
    if truth is not None:
        report = evaluate_field(result.field, truth,
                                ssim_window=cfg.metrics_ssim_window)
        report.save_kv(out / "metrics.txt")
        for key, value in report.to_record().items():
            if value != "":
                print(f"{key} = {value}")
    print(f"algo={args.algo} iterations={len(result.per_iteration)} "
          f"residual={result.final_residual:.6e} out={out}")
    return 0


def _cmd_evaluate(args) -> int:
    recon = fileio.load_grid(args.recon)
    truth = fileio.load_grid(args.truth)
    if not isinstance(recon, ComplexField) or not isinstance(truth, ComplexField):
        raise ConfigError("evaluate expects complex field dumps")
    report = evaluate_field(recon, truth)
    for key, value in report.to_record().items():
        if value != "":
            print(f"{key} = {value}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.save_kv(out / "metrics.txt")
    return 0


def _load_real_image(path: Path) -> np.ndarray:
    if path.suffix == ".f64":
        loaded = fileio.load_grid(path)
        data = loaded.data
        return np.abs(data) if np.iscomplexobj(data) else np.asarray(data)
    from PIL import Image

    return np.asarray(Image.open(path).convert("L"), dtype=np.float64) / 255.0


def _cmd_segment(args) -> int:
    image = _load_real_image(Path(args.image))
    if args.threshold == "otsu":
        mode, value = "otsu", None
    else:
        try:
            mode, value = "fixed", float(args.threshold)
        except ValueError:
            raise ConfigError(
                f"--threshold must be 'otsu' or a number, got {args.threshold!r}"
            ) from None
    labels = watershed_segment(image, threshold_mode=mode, threshold=value,
                               min_distance=args.min_distance)
    count = count_cells(labels, exclude_margin=not args.keep_margin)
    print(f"count={count}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_label_png(labels, out / "labels.png")
        save_label_overlay_png(labels, out / "labels_color.png")
        print(f"labels written to {out}")
    return 0


def _cmd_bench(args) -> int:
    cfg, _ = _load_cfg(args)
    out = run_experiment(cfg, out_dir=cfg.output_dir,
                         threads=args.threads,
                         timing=True if args.timing else None)
    print(f"bench complete: {out / 'results.csv'}")
    return 0


def _cmd_masks(args) -> int:
    cfg, _ = _load_cfg(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    masks = cfg.make_masks()
    save_mask_set(masks, out)
    print(f"wrote {len(masks)} {masks.kind} masks "
          f"({masks.shape[0]}x{masks.shape[1]}) to {out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "reconstruct": _cmd_reconstruct,
    "evaluate": _cmd_evaluate,
    "segment": _cmd_segment,
    "bench": _cmd_bench,
    "masks": _cmd_masks,
}


def cli(argv=None) -> int:
    """Parse arguments and run one subcommand; returns the exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error in {exc.stage}: {exc.cause}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
