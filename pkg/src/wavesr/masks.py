"""Unit-modulus phase mask generation: i.i.d. phase screens and shifted diffusers.

Two kinds of mask set:

``iid-phase``
    Every mask is an independent screen: per-pixel phase uniform on [0, 2 pi),
    optionally box-smoothed over ``feature_scale`` pixels (complex smoothing,
    then renormalized back to unit modulus) to give the screen a finite
    correlation length.

``shifted-diffuser``
    One master screen is generated the same way on an enlarged grid, and each
    mask is a crop at an (dx, dy) offset, modelling a physical diffuser that
    is stepped across x-y positions. Offsets default to a sqrt(count) x
    sqrt(count) raster.

All randomness is drawn from counter-based Philox streams keyed by
(seed, stream index), so generation is bit-reproducible and order-independent.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter

from . import fileio
from .errors import ConfigError
from .grids import ComplexField

KIND_IID = "iid-phase"
KIND_SHIFTED = "shifted-diffuser"
MASK_KINDS = (KIND_IID, KIND_SHIFTED)

_UNIT_MODULUS_TOL = 1e-12


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, stream]))


def _phase_screen(rng: np.random.Generator, shape: tuple[int, int],
                  feature_scale: int) -> np.ndarray:
    """Unit-modulus random screen with features about feature_scale pixels wide."""
    phi = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    screen = np.exp(1j * phi)
    if feature_scale > 1:
        smooth = (uniform_filter(screen.real, size=feature_scale, mode="wrap")
                  + 1j * uniform_filter(screen.imag, size=feature_scale, mode="wrap"))
        mag = np.abs(smooth)
        # smoothed phasors can cancel; re-seed those pixels with unit phase
        screen = np.where(mag > 1e-12, smooth / np.where(mag > 1e-12, mag, 1.0), 1.0 + 0.0j)
    return screen


@dataclass(frozen=True, eq=False)
class MaskSet:
    """An ordered collection of unit-modulus phase masks sharing one grid."""

    masks: tuple[ComplexField, ...]
    kind: str
    seed: int
    feature_scale: int = 1
    shift_offsets: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if not self.masks:
            raise ConfigError("mask set must contain at least one mask")
        first = self.masks[0]
        for m in self.masks:
            if m.shape != first.shape or m.pitch != first.pitch:
                raise ConfigError("all masks must share dimensions and pitch")
            if np.abs(np.abs(m.data) - 1.0).max() > _UNIT_MODULUS_TOL:
                raise ConfigError("mask samples must have unit modulus")
        if self.kind == KIND_SHIFTED:
            if self.shift_offsets is None or len(self.shift_offsets) != len(self.masks):
                raise ConfigError("shifted-diffuser sets need one offset per mask")

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self):
        return iter(self.masks)

    def __getitem__(self, index: int) -> ComplexField:
        return self.masks[index]

    @property
    def shape(self) -> tuple[int, int]:
        return self.masks[0].shape

    @property
    def pitch(self) -> float:
        return self.masks[0].pitch


def raster_offsets(count: int, step: int = 1) -> tuple[tuple[int, int], ...]:
    """Row-major (dx, dy) offsets on a sqrt(count) x sqrt(count) raster."""
    side = math.isqrt(count)
    if side * side != count:
        raise ConfigError(
            f"count {count} is not a perfect square; supply explicit offsets"
        )
    return tuple((col * step, row * step) for row in range(side) for col in range(side))


def generate_mask_set(kind: str, count: int, shape: tuple[int, int], pitch: float,
                      seed: int, feature_scale: int = 3, shift_step: int = 1,
                      offsets: tuple[tuple[int, int], ...] | None = None) -> MaskSet:
    """Generate a deterministic mask set.

    ``shape`` is the HR target grid the masks must match. For
    ``shifted-diffuser`` the offsets default to a square raster of unit
    ``shift_step``; a non-square ``count`` is rejected unless explicit
    ``offsets`` are given.
    """
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    if feature_scale < 1:
        raise ConfigError(f"feature_scale must be >= 1, got {feature_scale}")
    h, w = shape

    if kind == KIND_IID:
        masks = tuple(
            ComplexField(_phase_screen(_rng(seed, i), (h, w), feature_scale), pitch)
            for i in range(count)
        )
        return MaskSet(masks, kind, seed, feature_scale)

    if kind == KIND_SHIFTED:
        if offsets is None:
            offsets = raster_offsets(count, shift_step)
        elif len(offsets) != count:
            raise ConfigError(f"{len(offsets)} offsets for {count} masks")
        offsets = tuple((int(dx), int(dy)) for dx, dy in offsets)
        max_dx = max(dx for dx, _ in offsets)
        max_dy = max(dy for _, dy in offsets)
        if min(min(o) for o in offsets) < 0:
            raise ConfigError("shift offsets must be nonnegative")
        master = _phase_screen(_rng(seed, 0), (h + max_dy, w + max_dx), feature_scale)
        masks = tuple(
            ComplexField(master[dy:dy + h, dx:dx + w], pitch) for dx, dy in offsets
        )
        return MaskSet(masks, kind, seed, feature_scale, offsets)

    raise ConfigError(f"unknown mask kind {kind!r}")


def save_mask_set(mask_set: MaskSet, directory: str | os.PathLike,
                  dump_masks: bool = True) -> None:
    """Persist a mask set: generation metadata plus (optionally) raw dumps.

    The metadata alone regenerates a set produced by :func:`generate_mask_set`.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    h, w = mask_set.shape
    record = {
        "kind": mask_set.kind,
        "count": len(mask_set),
        "height": h,
        "width": w,
        "pitch_um": repr(mask_set.pitch),
        "seed": mask_set.seed,
        "feature_scale": mask_set.feature_scale,
        "dumped": int(dump_masks),
    }
    if mask_set.shift_offsets is not None:
        record["offsets"] = ";".join(f"{dx},{dy}" for dx, dy in mask_set.shift_offsets)
    fileio.write_kv(directory / "maskset.meta", record)
    if dump_masks:
        for i, mask in enumerate(mask_set):
            fileio.save_grid(mask, directory / f"mask_{i:04d}.f64")


def load_mask_set(directory: str | os.PathLike) -> MaskSet:
    """Load a persisted mask set, regenerating from metadata if not dumped."""
    directory = Path(directory)
    meta = fileio.read_kv(directory / "maskset.meta")
    count = int(meta["count"])
    shape = (int(meta["height"]), int(meta["width"]))
    pitch = float(meta["pitch_um"])
    seed = int(meta["seed"])
    feature_scale = int(meta["feature_scale"])
    offsets = None
    if "offsets" in meta and meta["offsets"]:
        offsets = tuple(
            tuple(int(v) for v in pair.split(","))
            for pair in meta["offsets"].split(";")
        )
    if int(meta.get("dumped", "0")):
        masks = tuple(
            fileio.load_grid(directory / f"mask_{i:04d}.f64") for i in range(count)
        )
        return MaskSet(masks, meta["kind"], seed, feature_scale, offsets)
    return generate_mask_set(meta["kind"], count, shape, pitch, seed,
                             feature_scale, offsets=offsets)
