"""Forward measurement synthesis and detector-noise injection.

One frame per mask: the target field is modulated, propagated to the detector
plane, its intensity taken, and each theta x theta patch integrated into one
detector pixel. Shot noise (Poisson) and additive white Gaussian noise at a
target power SNR can then be applied to a clean stack.

Noise streams are counter-based Philox keyed by (seed, frame index), so frames
can be noised in any order, serially or in parallel, with identical results.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .errors import ConfigError, ShapeError
from .grids import ComplexField, IntensityImage, bin_array
from .masks import MaskSet
from .propagation import OpticalConfig, propagate_array

NOISE_NONE = "none"
NOISE_POISSON = "poisson"
NOISE_GAUSSIAN = "gaussian"
NOISE_KINDS = (NOISE_NONE, NOISE_POISSON, NOISE_GAUSSIAN)


def _noise_rng(seed: int, frame_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, 0x10000 + frame_index])
    )


@dataclass(frozen=True, eq=False)
class MeasurementStack:
    """Ordered low-resolution intensity frames, one per modulation mask."""

    frames: tuple[IntensityImage, ...]
    noise_kind: str = NOISE_NONE
    noise_param: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if not self.frames:
            raise ConfigError("measurement stack must contain at least one frame")
        first = self.frames[0]
        for f in self.frames:
            if f.shape != first.shape or f.pitch != first.pitch:
                raise ShapeError("all frames must share dimensions and pitch")
        if self.noise_kind not in (NOISE_NONE, NOISE_POISSON, NOISE_GAUSSIAN):
            raise ConfigError(f"unknown noise kind {self.noise_kind!r}")

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, index: int) -> IntensityImage:
        return self.frames[index]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    @property
    def pitch(self) -> float:
        return self.frames[0].pitch

    def arrays(self) -> list[np.ndarray]:
        return [f.data for f in self.frames]


def simulate_measurements(u: ComplexField, masks: MaskSet,
                          optics: OpticalConfig) -> MeasurementStack:
    """Synthesize the clean measurement stack for a target field.

    Frame l is bin(|propagate(mask_l * u, z)|^2) on the detector grid. Pure
    and deterministic; noise is applied separately.
    """
    geom = optics.geometry
    if masks.shape != u.shape:
        raise ShapeError(f"mask grid {masks.shape} != target grid {u.shape}")
    if masks.pitch != u.pitch:
        raise ShapeError(f"mask pitch {masks.pitch} != target pitch {u.pitch}")
    if u.pitch != geom.hr_pitch:
        raise ShapeError(f"target pitch {u.pitch} != geometry HR pitch {geom.hr_pitch}")
    geom.check_hr_shape(u.shape)

    frames = []
    for mask in masks:
        w = propagate_array(mask.data * u.data, u.pitch, optics.wavelength,
                            optics.distance, optics.pad_factor)
        lr = bin_array(np.abs(w) ** 2, geom.theta)
        frames.append(IntensityImage(lr, geom.lr_pitch))
    return MeasurementStack(tuple(frames))


def _require_clean(stack: MeasurementStack) -> None:
    if stack.noise_kind != NOISE_NONE:
        raise ConfigError(
            f"stack already carries {stack.noise_kind} noise; noise is applied once"
        )


def add_poisson_noise(stack: MeasurementStack, photon_level: float,
                      seed: int) -> MeasurementStack:
    """Shot noise: each pixel becomes Poisson(value * photon_level) / photon_level.

    ``photon_level`` is the expected photon count at unit intensity; larger
    values mean less relative noise.
    """
    if not photon_level > 0:
        raise ConfigError(f"photon_level must be > 0, got {photon_level}")
    _require_clean(stack)
    frames = []
    for i, frame in enumerate(stack):
        rng = _noise_rng(seed, i)
        counts = rng.poisson(frame.data * photon_level)
        frames.append(IntensityImage(counts / photon_level, frame.pitch))
    return MeasurementStack(tuple(frames), NOISE_POISSON, float(photon_level), seed)


def add_gaussian_noise(stack: MeasurementStack, snr_db: float | None, seed: int,
                       clamp: bool = False) -> MeasurementStack:
    """Additive white Gaussian noise at a target power SNR over the whole stack.

    The noise variance is mean(y^2) / 10^(snr_db/10) with the mean taken over
    every pixel of every frame. ``snr_db`` of None (or +inf) is the no-noise
    sentinel. Noised frames are left unclamped (zero-mean noise) unless
    ``clamp`` is set, so frames may go negative; the solver tolerates that.
    """
    _require_clean(stack)
    if snr_db is None or np.isinf(snr_db):
        return stack
    signal_power = float(np.mean([np.mean(f.data**2) for f in stack]))
    sigma = np.sqrt(signal_power / 10.0 ** (snr_db / 10.0))
    frames = []
    for i, frame in enumerate(stack):
        rng = _noise_rng(seed, i)
        noisy = frame.data + rng.normal(0.0, sigma, size=frame.shape)
        if clamp:
            noisy = np.clip(noisy, 0.0, None)
        frames.append(IntensityImage(noisy, frame.pitch, allow_negative=not clamp))
    return MeasurementStack(tuple(frames), NOISE_GAUSSIAN, float(snr_db), seed)


def realized_snr_db(clean: MeasurementStack, noisy: MeasurementStack) -> float:
    """Power SNR actually present between a clean stack and its noisy version."""
    signal = sum(float(np.sum(f.data**2)) for f in clean)
    noise = sum(
        float(np.sum((n.data - c.data) ** 2)) for c, n in zip(clean, noisy)
    )
    if noise == 0.0:
        return float("inf")
    return 10.0 * np.log10(signal / noise)


def save_stack(stack: MeasurementStack, directory: str | os.PathLike) -> None:
    """Persist a stack as one metadata record plus per-frame raw dumps."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    h, w = stack.shape
    fileio.write_kv(directory / "stack.meta", {
        "count": len(stack),
        "height": h,
        "width": w,
        "pitch_um": repr(stack.pitch),
        "noise_kind": stack.noise_kind,
        "noise_param": "" if stack.noise_param is None else repr(stack.noise_param),
        "seed": "" if stack.seed is None else stack.seed,
    })
    for i, frame in enumerate(stack):
        fileio.save_grid(frame, directory / f"frame_{i:04d}.f64")


def load_stack(directory: str | os.PathLike) -> MeasurementStack:
    """Load a stack persisted by :func:`save_stack`."""
    directory = Path(directory)
    meta = fileio.read_kv(directory / "stack.meta")
    count = int(meta["count"])
    frames = tuple(
        fileio.load_grid(directory / f"frame_{i:04d}.f64") for i in range(count)
    )
    noise_param = float(meta["noise_param"]) if meta.get("noise_param") else None
    seed = int(meta["seed"]) if meta.get("seed") else None
    return MeasurementStack(frames, meta.get("noise_kind", NOISE_NONE),
                            noise_param, seed)
