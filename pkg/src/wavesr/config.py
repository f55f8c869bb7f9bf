"""Experiment configuration: flat key-value text with section prefixes.

One file describes a full run: target source, optics, mask parameters, noise,
solver settings, denoiser choice, benchmark sweep axes, and output toggles.
Files are diff-friendly plain text (``section.key = value`` lines) and
round-trip load -> save -> load to an identical configuration. A single root
``seed`` drives every stochastic component unless a component seed overrides
it; the per-purpose counter streams keep the draws independent.
"""

from __future__ import annotations

import dataclasses
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .denoisers import Denoiser, make_denoiser
from .errors import ConfigError
from .grids import ComplexField, SamplingGeometry
from .masks import MASK_KINDS, MaskSet, generate_mask_set
from .measurements import NOISE_KINDS
from .propagation import OpticalConfig
from .solver import EPOCH_MODES, INIT_MODES, PATCH_UPDATES, ReconConfig
from .targets import (load_builtin_image, make_cells_target, make_target,
                      rescale, resize_image)

TARGET_KINDS = ("builtin", "cells", "files")
ALGO_NAMES = ("conv", "do-tv", "do-ext")
_ALGO_DENOISERS = {"conv": "identity", "do-tv": "tv", "do-ext": "external"}


@dataclass
class ExperimentConfig:
    """Everything needed to regenerate a run from scratch."""

    seed: int = 0
    output_dir: str = "out"

    target_kind: str = "builtin"
    target_amplitude: str = "camera"
    target_phase: str = "moon"
    target_height: int = 128
    target_width: int = 128
    target_amplitude_min: float = 0.0
    target_amplitude_max: float = 1.0
    target_phase_min: float = -math.pi / 2
    target_phase_max: float = math.pi / 2
    target_cells_count: int = 70

    optics_wavelength_um: float = 0.532
    optics_distance_um: float = 21550.0
    optics_theta: int = 2
    optics_detector_pitch_um: float = 1.4
    optics_hr_pitch_um: float | None = None
    optics_pad_factor: int = 1

    masks_kind: str = "iid-phase"
    masks_count: int = 30
    masks_feature_scale: int = 3
    masks_shift_step: int = 1
    masks_seed: int | None = None

    noise_kind: str = "none"
    noise_photon_level: float = 1e4
    noise_snr_db: float = 10.0
    noise_clamp: bool = False
    noise_seed: int | None = None

    solver_eta: float = 1.0
    solver_beta: float = 1.0
    solver_outer_iters: int = 100
    solver_init: str = "backprop-mean"
    solver_convergence_tol: float = 1e-6
    solver_epoch_mode: str = "sequential"
    solver_patch_update: str = "scale"
    solver_checkpoint_every: int = 0
    solver_epsilon: float = 1e-9

    denoiser_strength: float = 0.02
    denoiser_phase_strength: float = 0.01
    denoiser_schedule: tuple = ()
    denoiser_command: str | None = None
    denoiser_workdir: str | None = None
    denoiser_timeout: float = 60.0

    bench_algos: tuple = ("conv", "do-tv")
    bench_thetas: tuple = ()
    bench_snr_dbs: tuple = ()
    bench_photon_levels: tuple = ()
    bench_mask_counts: tuple = ()
    bench_threads: int = 1
    bench_timing: bool = False

    metrics_ssim_window: int = 11
    metrics_segment: bool = False
    metrics_min_distance: int = 7
    metrics_reference_count: int | None = None

    output_pngs: bool = True

    # ---- derived builders -------------------------------------------------

    def validate(self, base_dir: str | os.PathLike | None = None) -> None:
        """Check enumerations, ranges, and that referenced files exist."""
        if self.target_kind not in TARGET_KINDS:
            raise ConfigError(f"target.kind must be one of {TARGET_KINDS}, "
                              f"got {self.target_kind!r}")
        if self.masks_kind not in MASK_KINDS:
            raise ConfigError(f"masks.kind must be one of {MASK_KINDS}, "
                              f"got {self.masks_kind!r}")
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigError(f"noise.kind must be one of {NOISE_KINDS}, "
                              f"got {self.noise_kind!r}")
        if self.solver_init not in INIT_MODES:
            raise ConfigError(f"solver.init must be one of {INIT_MODES}, "
                              f"got {self.solver_init!r}")
        if self.solver_epoch_mode not in EPOCH_MODES:
            raise ConfigError(f"solver.epoch_mode must be one of {EPOCH_MODES}, "
                              f"got {self.solver_epoch_mode!r}")
        if self.solver_patch_update not in PATCH_UPDATES:
            raise ConfigError(f"solver.patch_update must be one of "
                              f"{PATCH_UPDATES}, got {self.solver_patch_update!r}")
        for algo in self.bench_algos:
            if algo not in ALGO_NAMES:
                raise ConfigError(f"bench.algos entries must be in {ALGO_NAMES}, "
                                  f"got {algo!r}")
        if self.optics_theta < 1:
            raise ConfigError(f"optics.theta must be >= 1, got {self.optics_theta}")
        if self.target_height < 1 or self.target_width < 1:
            raise ConfigError("target dimensions must be positive")
        base = Path(base_dir) if base_dir is not None else Path(".")
        if self.target_kind == "files":
            for label, name in (("target.amplitude", self.target_amplitude),
                                ("target.phase", self.target_phase)):
                p = Path(name)
                if not p.is_absolute():
                    p = base / p
                if not p.is_file():
                    raise ConfigError(f"{label} file not found: {p}")
        if "do-ext" in self.bench_algos or self.denoiser_command:
            if self.denoiser_command:
                p = Path(self.denoiser_command)
                if not p.is_absolute():
                    p = base / p
                import shutil
                if not p.is_file() and shutil.which(str(self.denoiser_command)) is None:
                    raise ConfigError(
                        f"denoiser.command not found: {self.denoiser_command}")
            elif "do-ext" in self.bench_algos:
                raise ConfigError("bench.algos includes do-ext but "
                                  "denoiser.command is not set")

    def geometry(self, theta: int | None = None) -> SamplingGeometry:
        t = self.optics_theta if theta is None else theta
        if self.optics_hr_pitch_um is not None:
            return SamplingGeometry(t, self.optics_hr_pitch_um)
        return SamplingGeometry.from_detector(t, self.optics_detector_pitch_um)

    def optical_config(self, theta: int | None = None) -> OpticalConfig:
        return OpticalConfig(wavelength=self.optics_wavelength_um,
                             distance=self.optics_distance_um,
                             geometry=self.geometry(theta),
                             pad_factor=self.optics_pad_factor)

    def make_target(self, theta: int | None = None,
                    base_dir: str | os.PathLike | None = None) -> ComplexField:
        shape = (self.target_height, self.target_width)
        pitch = self.geometry(theta).hr_pitch
        amp_range = (self.target_amplitude_min, self.target_amplitude_max)
        phase_range = (self.target_phase_min, self.target_phase_max)
        if self.target_kind == "builtin":
            return make_target(shape, pitch, amplitude=self.target_amplitude,
                               phase=self.target_phase,
                               amplitude_range=amp_range,
                               phase_range=phase_range)
        if self.target_kind == "cells":
            return make_cells_target(shape, pitch, count=self.target_cells_count,
                                     seed=self.seed,
                                     amplitude_range=amp_range)
        base = Path(base_dir) if base_dir is not None else Path(".")

        def load_image(name: str) -> np.ndarray:
            p = Path(name)
            if not p.is_absolute():
                p = base / p
            from PIL import Image
            img = np.asarray(Image.open(p).convert("L"), dtype=np.float64) / 255.0
            return resize_image(img, shape)

        amp = rescale(load_image(self.target_amplitude), amp_range)
        pha = rescale(load_image(self.target_phase), phase_range)
        return ComplexField(amp * np.exp(1j * pha), pitch)

    def make_masks(self, theta: int | None = None,
                   count: int | None = None) -> MaskSet:
        shape = (self.target_height, self.target_width)
        return generate_mask_set(
            self.masks_kind,
            self.masks_count if count is None else count,
            shape, self.geometry(theta).hr_pitch,
            self.masks_seed if self.masks_seed is not None else self.seed,
            feature_scale=self.masks_feature_scale,
            shift_step=self.masks_shift_step,
        )

    def recon_config(self) -> ReconConfig:
        return ReconConfig(eta=self.solver_eta, beta=self.solver_beta,
                           outer_iters=self.solver_outer_iters,
                           init=self.solver_init, rng_seed=self.seed,
                           epsilon=self.solver_epsilon,
                           convergence_tol=self.solver_convergence_tol,
                           epoch_mode=self.solver_epoch_mode,
                           patch_update=self.solver_patch_update,
                           checkpoint_every=self.solver_checkpoint_every)

    def make_denoiser(self, algo: str) -> Denoiser:
        if algo not in ALGO_NAMES:
            raise ConfigError(f"algo must be one of {ALGO_NAMES}, got {algo!r}")
        kind = _ALGO_DENOISERS[algo]
        if kind == "identity":
            return make_denoiser("identity")
        schedule = list(self.denoiser_schedule) or None
        if kind == "tv":
            return make_denoiser("tv", strength=self.denoiser_strength,
                                 phase_strength=self.denoiser_phase_strength,
                                 schedule=schedule)
        workdir = self.denoiser_workdir or tempfile.mkdtemp(
            prefix="wavesr-denoiser-")
        return make_denoiser("external", command=self.denoiser_command,
                             workdir=workdir,
                             strength=self.denoiser_strength,
                             phase_strength=self.denoiser_phase_strength,
                             schedule=schedule, timeout=self.denoiser_timeout)


# ---- key-value serialization ---------------------------------------------


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_float_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(part) for part in text.split(","))


def _parse_int_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


def _parse_str_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(part.strip() for part in text.split(","))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _opt(parser):
    def parse(text: str):
        return None if not text.strip() else parser(text)
    return parse


# file key -> (attribute, parser); order here is the canonical file order
_KEYS: dict[str, tuple[str, object]] = {
    "seed": ("seed", int),
    "out": ("output_dir", str),
    "target.kind": ("target_kind", str),
    "target.amplitude": ("target_amplitude", str),
    "target.phase": ("target_phase", str),
    "target.height": ("target_height", int),
    "target.width": ("target_width", int),
    "target.amplitude_min": ("target_amplitude_min", float),
    "target.amplitude_max": ("target_amplitude_max", float),
    "target.phase_min": ("target_phase_min", float),
    "target.phase_max": ("target_phase_max", float),
    "target.cells_count": ("target_cells_count", int),
    "optics.wavelength_um": ("optics_wavelength_um", float),
    "optics.distance_um": ("optics_distance_um", float),
    "optics.theta": ("optics_theta", int),
    "optics.detector_pitch_um": ("optics_detector_pitch_um", float),
    "optics.hr_pitch_um": ("optics_hr_pitch_um", _opt(float)),
    "optics.pad_factor": ("optics_pad_factor", int),
    "masks.kind": ("masks_kind", str),
    "masks.count": ("masks_count", int),
    "masks.feature_scale": ("masks_feature_scale", int),
    "masks.shift_step": ("masks_shift_step", int),
    "masks.seed": ("masks_seed", _opt(int)),
    "noise.kind": ("noise_kind", str),
    "noise.photon_level": ("noise_photon_level", float),
    "noise.snr_db": ("noise_snr_db", float),
    "noise.clamp": ("noise_clamp", _parse_bool),
    "noise.seed": ("noise_seed", _opt(int)),
    "solver.eta": ("solver_eta", float),
    "solver.beta": ("solver_beta", float),
    "solver.outer_iters": ("solver_outer_iters", int),
    "solver.init": ("solver_init", str),
    "solver.convergence_tol": ("solver_convergence_tol", float),
    "solver.epoch_mode": ("solver_epoch_mode", str),
    "solver.patch_update": ("solver_patch_update", str),
    "solver.checkpoint_every": ("solver_checkpoint_every", int),
    "solver.epsilon": ("solver_epsilon", float),
    "denoiser.strength": ("denoiser_strength", float),
    "denoiser.phase_strength": ("denoiser_phase_strength", float),
    "denoiser.schedule": ("denoiser_schedule", _parse_float_list),
    "denoiser.command": ("denoiser_command", _opt(str)),
    "denoiser.workdir": ("denoiser_workdir", _opt(str)),
    "denoiser.timeout": ("denoiser_timeout", float),
    "bench.algos": ("bench_algos", _parse_str_list),
    "bench.thetas": ("bench_thetas", _parse_int_list),
    "bench.snr_dbs": ("bench_snr_dbs", _parse_float_list),
    "bench.photon_levels": ("bench_photon_levels", _parse_float_list),
    "bench.mask_counts": ("bench_mask_counts", _parse_int_list),
    "bench.threads": ("bench_threads", int),
    "bench.timing": ("bench_timing", _parse_bool),
    "metrics.ssim_window": ("metrics_ssim_window", int),
    "metrics.segment": ("metrics_segment", _parse_bool),
    "metrics.min_distance": ("metrics_min_distance", int),
    "metrics.reference_count": ("metrics_reference_count", _opt(int)),
    "output.pngs": ("output_pngs", _parse_bool),
}


def parse_config(text: str, base_dir: str | os.PathLike | None = None,
                 validate: bool = True) -> ExperimentConfig:
    """Parse config text; unknown keys are rejected to catch typos."""
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        attr, parser = _KEYS[key]
        try:
            setattr(cfg, attr, parser(value.strip()))
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    if validate:
        cfg.validate(base_dir)
    return cfg


def load_config(path: str | os.PathLike, validate: bool = True) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent, validate=validate)


def format_config(cfg: ExperimentConfig) -> str:
    lines = ["# experiment configuration"]
    section = ""
    for key, (attr, _parser) in _KEYS.items():
        sec = key.partition(".")[0] if "." in key else ""
        if sec != section:
            section = sec
            lines.append("")
        lines.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def save_config(cfg: ExperimentConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(format_config(cfg))


def replace(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Functional update preserving dataclass semantics."""
    return dataclasses.replace(cfg, **changes)
