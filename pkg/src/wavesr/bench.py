"""Benchmark harness: simulate, add noise, reconstruct with each enabled
algorithm, score, and tabulate.

A run covers the cross product of the configured sweep axes (undersampling
factor, noise level, mask count); each cell is independent and runs in a
worker pool. Outputs are written in cell-index order after all cells finish,
so the report files are byte-identical regardless of worker count. Timing
columns stay empty unless timing is requested, keeping default outputs
reproducible run-to-run.

Grid note: a cell whose undersampling factor does not divide the configured
target size trims the grid down to the nearest multiple.
"""

from __future__ import annotations

import csv
import dataclasses
import os
import traceback
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .config import ExperimentConfig, save_config
from .errors import ConfigError
from .measurements import add_gaussian_noise, add_poisson_noise, simulate_measurements
from .metrics import MetricsReport, evaluate_field
from .segmentation import count_cells, save_label_overlay_png, watershed_segment
from .solver import reconstruct

RESULTS_HEADER = ("algo", "theta", "noise_kind", "noise_param", "masks",
                  "iters", "psnr_amp_db", "psnr_phase_db", "ssim_amp",
                  "ssim_phase", "cell_count", "seconds")
_ALGO_METRIC_COLUMNS = ("psnr_amp_db", "psnr_phase_db", "ssim_amp",
                        "ssim_phase", "cell_count", "iters")


class StageError(RuntimeError):
    """An experiment stage failed; carries the stage name for the report."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass(frozen=True)
class CellSpec:
    """One sweep cell: a (theta, noise level, mask count) combination."""

    index: int
    theta: int
    noise_kind: str
    noise_param: float | None
    mask_count: int

    @property
    def dirname(self) -> str:
        if self.noise_kind == "gaussian":
            tag = f"g{self.noise_param:g}"
        elif self.noise_kind == "poisson":
            tag = f"p{self.noise_param:g}"
        else:
            tag = "clean"
        return f"cell_{self.index:03d}_t{self.theta}_{tag}_m{self.mask_count}"

    def noise_param_text(self) -> str:
        return "" if self.noise_param is None else f"{self.noise_param:g}"


def sweep_cells(cfg: ExperimentConfig) -> list[CellSpec]:
    """Expand the configured sweep axes into an ordered cell list."""
    thetas = tuple(cfg.bench_thetas) or (cfg.optics_theta,)
    if cfg.noise_kind == "gaussian":
        levels = tuple(cfg.bench_snr_dbs) or (cfg.noise_snr_db,)
        noise_axis = [("gaussian", float(v)) for v in levels]
    elif cfg.noise_kind == "poisson":
        levels = tuple(cfg.bench_photon_levels) or (cfg.noise_photon_level,)
        noise_axis = [("poisson", float(v)) for v in levels]
    else:
        noise_axis = [("none", None)]
    counts = tuple(cfg.bench_mask_counts) or (cfg.masks_count,)
    cells = []
    for theta in thetas:
        for kind, param in noise_axis:
            for count in counts:
                cells.append(CellSpec(len(cells), int(theta), kind, param,
                                      int(count)))
    return cells


@dataclass
class CellResult:
    spec: CellSpec
    reports: dict[str, MetricsReport]
    iters: dict[str, int]
    seconds: dict[str, float]


def _trimmed(cfg: ExperimentConfig, theta: int) -> ExperimentConfig:
    h = cfg.target_height - cfg.target_height % theta
    w = cfg.target_width - cfg.target_width % theta
    if h < theta or w < theta:
        raise ConfigError(
            f"target {cfg.target_height}x{cfg.target_width} too small for "
            f"theta {theta}")
    if (h, w) == (cfg.target_height, cfg.target_width):
        return cfg
    return dataclasses.replace(cfg, target_height=h, target_width=w)


def run_cell(cfg: ExperimentConfig, cell: CellSpec,
             out_dir: str | os.PathLike | None = None,
             timing: bool = False) -> CellResult:
    """Execute one sweep cell: full pipeline for every enabled algorithm."""
    cfg = _trimmed(cfg, cell.theta)
    out = Path(out_dir) if out_dir is not None else None
    with _stage("setup"):
        optics = cfg.optical_config(cell.theta)
        target = cfg.make_target(cell.theta)
        masks = cfg.make_masks(cell.theta, cell.mask_count)
    with _stage("simulate"):
        stack = simulate_measurements(target, masks, optics)
    with _stage("noise"):
        noise_seed = cfg.noise_seed if cfg.noise_seed is not None else cfg.seed
        if cell.noise_kind == "poisson":
            stack = add_poisson_noise(stack, cell.noise_param, noise_seed)
        elif cell.noise_kind == "gaussian":
            stack = add_gaussian_noise(stack, cell.noise_param, noise_seed,
                                       clamp=cfg.noise_clamp)

    reports: dict[str, MetricsReport] = {}
    iters: dict[str, int] = {}
    seconds: dict[str, float] = {}
    segment_wanted = cfg.metrics_segment or cfg.target_kind == "cells"
    reference_count = cfg.metrics_reference_count
    if reference_count is None and cfg.target_kind == "cells":
        reference_count = cfg.target_cells_count

    for algo in cfg.bench_algos:
        algo_dir = out / algo if out is not None else None
        if algo_dir is not None:
            algo_dir.mkdir(parents=True, exist_ok=True)
        with _stage(f"reconstruct[{algo}]"):
            denoiser = cfg.make_denoiser(algo)
            result = reconstruct(stack, masks, optics, cfg.recon_config(),
                                 denoiser=denoiser, truth=target,
                                 output_dir=algo_dir)
        with _stage(f"metrics[{algo}]"):
            report = evaluate_field(result.field, target,
                                    ssim_window=cfg.metrics_ssim_window)
            if segment_wanted:
                labels = watershed_segment(
                    np.abs(result.field.data),
                    min_distance=cfg.metrics_min_distance)
                count = count_cells(labels, exclude_margin=True)
                err = (None if not reference_count else
                       100.0 * abs(count - reference_count) / reference_count)
                report = dataclasses.replace(report, cell_count=count,
                                             counting_error=err)
                if algo_dir is not None and cfg.output_pngs:
                    save_label_overlay_png(labels, algo_dir / "labels.png")
        reports[algo] = report
        iters[algo] = len(result.per_iteration)
        seconds[algo] = result.wall_time
        if algo_dir is not None:
            with _stage(f"report[{algo}]"):
                fileio.save_grid(result.field, algo_dir / "recon.f64")
                result.save_iteration_log(algo_dir / "iterations.csv",
                                          include_elapsed=timing)
                report.save_kv(algo_dir / "metrics.txt")
                if cfg.output_pngs:
                    fileio.export_amplitude_png(result.field,
                                                algo_dir / "amplitude.png")
                    fileio.export_phase_png(result.field,
                                            algo_dir / "phase.png")
    if out is not None and cfg.output_pngs:
        with _stage("report"):
            fileio.export_amplitude_png(target, out / "target_amplitude.png")
            fileio.export_phase_png(target, out / "target_phase.png")
    return CellResult(cell, reports, iters, seconds)


def _write_results_csv(path: Path, cfg: ExperimentConfig,
                       results: list[CellResult], timing: bool) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for res in results:
            for algo in cfg.bench_algos:
                if algo not in res.reports:
                    continue
                rep = res.reports[algo]
                writer.writerow([
                    algo,
                    res.spec.theta,
                    res.spec.noise_kind,
                    res.spec.noise_param_text(),
                    res.spec.mask_count,
                    res.iters[algo],
                    f"{rep.psnr_amplitude:.6f}",
                    f"{rep.psnr_phase:.6f}",
                    f"{rep.ssim_amplitude:.6f}",
                    f"{rep.ssim_phase:.6f}",
                    "" if rep.cell_count is None else rep.cell_count,
                    f"{res.seconds[algo]:.3f}" if timing else "",
                ])


def _write_summary_csv(path: Path, cfg: ExperimentConfig,
                       results: list[CellResult]) -> None:
    """One row per sweep cell with every algorithm's metrics side by side."""
    header = ["cell", "theta", "noise_kind", "noise_param", "masks"]
    for algo in cfg.bench_algos:
        header.extend(f"{algo}_{col}" for col in _ALGO_METRIC_COLUMNS)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for res in results:
            row = [res.spec.index, res.spec.theta, res.spec.noise_kind,
                   res.spec.noise_param_text(), res.spec.mask_count]
            for algo in cfg.bench_algos:
                rep = res.reports.get(algo)
                if rep is None:
                    row.extend([""] * len(_ALGO_METRIC_COLUMNS))
                    continue
                row.extend([
                    f"{rep.psnr_amplitude:.6f}",
                    f"{rep.psnr_phase:.6f}",
                    f"{rep.ssim_amplitude:.6f}",
                    f"{rep.ssim_phase:.6f}",
                    "" if rep.cell_count is None else rep.cell_count,
                    res.iters[algo],
                ])
            writer.writerow(row)


def run_experiment(cfg: ExperimentConfig,
                   out_dir: str | os.PathLike | None = None,
                   threads: int | None = None,
                   timing: bool | None = None) -> Path:
    """Run the configured experiment (single cell or full sweep).

    Writes results.csv (one row per cell and algorithm, fixed schema),
    summary.csv (one row per cell, algorithms side by side), per-cell
    directories, and a copy of the resolved configuration. On any stage
    failure the completed outputs are kept, a FAILED marker records the
    stage-tagged error, and the error is re-raised.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = threads if threads is not None else cfg.bench_threads
    timing = cfg.bench_timing if timing is None else timing
    cells = sweep_cells(cfg)
    save_config(cfg, out / "config.txt")

    results: list[CellResult | None] = [None] * len(cells)
    failures: list[tuple[CellSpec, BaseException]] = []

    def job(cell: CellSpec):
        cell_dir = out / cell.dirname
        cell_dir.mkdir(parents=True, exist_ok=True)
        try:
            results[cell.index] = run_cell(cfg, cell, cell_dir, timing=timing)
        except BaseException as exc:
            stage = exc.stage if isinstance(exc, StageError) else "unknown"
            (cell_dir / "FAILED").write_text(
                f"stage = {stage}\nerror = {exc}\n")
            failures.append((cell, exc))

    if threads and threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(job, cells))
    else:
        for cell in cells:
            job(cell)

    finished = [r for r in results if r is not None]
    _write_results_csv(out / "results.csv", cfg, finished, timing)
    _write_summary_csv(out / "summary.csv", cfg, finished)

    if failures:
        cell, exc = failures[0]
        stage = exc.stage if isinstance(exc, StageError) else "unknown"
        detail = "".join(traceback.format_exception_only(type(exc), exc))
        (out / "FAILED").write_text(
            f"failed_cells = {len(failures)}\nfirst_cell = {cell.dirname}\n"
            f"stage = {stage}\nerror = {detail}")
        raise exc
    return out
