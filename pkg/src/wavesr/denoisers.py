"""Enhancing regularizers plugged into the reconstruction prior step.

A denoiser acts on real 2-D grids. Complex fields are handled by decomposing
into amplitude and (raw wrapped) phase, denoising each channel with its own
strength, and recomposing; phase structures carry the scientific payload, so
the channels are never mixed. Three kinds are provided:

  * identity - no-op, turns the plug-and-play solver into the plain
    fidelity-only baseline;
  * tv - isotropic total-variation denoising (dual projected gradient);
  * external - a subprocess adapter exchanging raw dumps with any
    executable that honours the file protocol below, standing in for
    learned denoisers that live out of process.

External file protocol (version 1), all inside the configured working
directory: request ``in.f64`` (row-major little-endian float64 payload) plus
``req.txt`` (keys: width, height, strength, version); response ``out.f64``
with the same shape; exit code 0 on success.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import threading
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import fileio
from .errors import (
    DenoiserExitError,
    DenoiserOutputError,
    DenoiserSpecError,
    DenoiserTimeoutError,
)
from .grids import ComplexField

PROTOCOL_VERSION = 1

_workdir_locks: dict[str, threading.Lock] = {}
_workdir_locks_guard = threading.Lock()


def _grad(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences with Neumann (zero last-row/col) boundaries."""
    gx = np.zeros_like(x)
    gx[:-1, :] = x[1:, :] - x[:-1, :]
    gy = np.zeros_like(x)
    gy[:, :-1] = x[:, 1:] - x[:, :-1]
    return gx, gy


def _div(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Negative adjoint of :func:`_grad`."""
    dx = np.empty_like(px)
    dx[0, :] = px[0, :]
    dx[1:-1, :] = px[1:-1, :] - px[:-2, :]
    dx[-1, :] = -px[-2, :]
    dy = np.empty_like(py)
    dy[:, 0] = py[:, 0]
    dy[:, 1:-1] = py[:, 1:-1] - py[:, :-2]
    dy[:, -1] = -py[:, -2]
    return dx + dy


def tv_value(x: np.ndarray) -> float:
    """Isotropic total variation, forward differences, Neumann boundaries."""
    gx, gy = _grad(np.asarray(x, dtype=np.float64))
    return float(np.sum(np.sqrt(gx**2 + gy**2)))


def tv_denoise(img: np.ndarray, weight: float, max_iters: int = 50) -> np.ndarray:
    """Approximate minimizer of 0.5*||x - img||^2 + weight*TV(x).

    Dual projected-gradient scheme with step 0.25 (the standard stability
    bound). ``weight`` 0 returns the input unchanged; the output is clipped to
    the input's [min, max] range, which the exact minimizer satisfies anyway.
    """
    if weight < 0:
        raise ValueError(f"weight must be >= 0, got {weight}")
    img = np.asarray(img, dtype=np.float64)
    if weight == 0.0 or max_iters <= 0:
        return img.copy()
    tau = 0.25
    px = np.zeros_like(img)
    py = np.zeros_like(img)
    for _ in range(max_iters):
        gx, gy = _grad(_div(px, py) - img / weight)
        denom = 1.0 + tau * np.sqrt(gx**2 + gy**2)
        px = (px + tau * gx) / denom
        py = (py + tau * gy) / denom
    out = img - weight * _div(px, py)
    return np.clip(out, img.min(), img.max())


def _workdir_lock(workdir: Path) -> threading.Lock:
    key = str(workdir.resolve())
    with _workdir_locks_guard:
        return _workdir_locks.setdefault(key, threading.Lock())


def _resolve_command(command) -> list[str]:
    if isinstance(command, (str, os.PathLike)):
        argv = [str(command)]
    else:
        argv = [str(part) for part in command]
    if not argv:
        raise DenoiserSpecError("empty external denoiser command")
    exe = argv[0]
    if not (Path(exe).is_file() or shutil.which(exe)):
        raise DenoiserSpecError(f"external denoiser executable not found: {exe}")
    return argv


def external_denoise(img: np.ndarray, command, workdir: str | os.PathLike,
                     strength: float, timeout: float = 60.0) -> np.ndarray:
    """Run one request through the external-denoiser file protocol.

    The executable must behave as a pure function of (input grid, strength).
    The command is validated before any file is written, so a missing
    executable leaves no partial request behind.
    """
    argv = _resolve_command(command)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DenoiserOutputError(f"external denoiser input must be 2-D, got {img.shape}")
    workdir = Path(workdir)
    with _workdir_lock(workdir):
        workdir.mkdir(parents=True, exist_ok=True)
        out_path = workdir / "out.f64"
        out_path.unlink(missing_ok=True)
        fileio.save_raw_real(img, workdir / "in.f64")
        fileio.write_kv(workdir / "req.txt", {
            "width": img.shape[1],
            "height": img.shape[0],
            "strength": repr(float(strength)),
            "version": PROTOCOL_VERSION,
        })
        try:
            proc = subprocess.run(argv, cwd=workdir, capture_output=True,
                                  timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            raise DenoiserTimeoutError(
                f"external denoiser timed out after {timeout}s: {argv}"
            ) from exc
        if proc.returncode != 0:
            stderr = proc.stderr.decode(errors="replace").strip()
            raise DenoiserExitError(
                f"external denoiser exited with {proc.returncode}: {stderr}"
            )
        if not out_path.is_file():
            raise DenoiserOutputError("external denoiser wrote no out.f64")
        try:
            return fileio.load_raw_real(out_path, img.shape)
        except Exception as exc:
            raise DenoiserOutputError(
                f"external denoiser response malformed: {exc}"
            ) from exc


class Denoiser(BaseEstimator, TransformerMixin):
    """Base class: a per-channel strength, an optional per-iteration schedule,
    and the amplitude/phase decomposition for complex fields.

    Subclasses implement :meth:`denoise` on a real grid. The sklearn
    transformer surface (``fit``/``transform``) applies the amplitude-channel
    strength to plain arrays so denoisers compose with pipelines.
    """

    kind = "abstract"

    def __init__(self, strength: float = 0.0, phase_strength: float | None = None,
                 schedule=None):
        self.strength = strength
        self.phase_strength = phase_strength
        self.schedule = schedule

    def _multiplier(self, iteration: int) -> float:
        if not self.schedule:
            return 1.0
        sched = list(self.schedule)
        value = float(sched[min(iteration, len(sched) - 1)])
        if value < 0:
            raise ValueError(f"schedule values must be >= 0, got {value}")
        return value

    def strengths_at(self, iteration: int) -> tuple[float, float]:
        if self.strength < 0:
            raise ValueError(f"strength must be >= 0, got {self.strength}")
        mult = self._multiplier(iteration)
        phase = self.strength if self.phase_strength is None else self.phase_strength
        return self.strength * mult, phase * mult

    def denoise(self, img: np.ndarray, strength: float) -> np.ndarray:
        raise NotImplementedError

    def denoise_field(self, field: ComplexField, iteration: int = 0) -> ComplexField:
        """Denoise amplitude and wrapped phase independently and recompose."""
        amp_strength, phase_strength = self.strengths_at(iteration)
        if amp_strength == 0.0 and phase_strength == 0.0:
            return field
        amp = self.denoise(np.abs(field.data), amp_strength)
        phase = self.denoise(np.angle(field.data), phase_strength)
        return ComplexField(amp * np.exp(1j * phase), field.pitch)

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return self.denoise(np.asarray(X, dtype=np.float64), self.strength)


class IdentityDenoiser(Denoiser):
    """No-op prior; reconstruction degenerates to the fidelity-only baseline."""

    kind = "identity"

    def __init__(self):
        super().__init__(strength=0.0, phase_strength=0.0)

    def denoise(self, img, strength):
        return img


class TvDenoiser(Denoiser):
    """Total-variation prior with separate amplitude and phase weights."""

    kind = "tv"

    def __init__(self, strength: float = 0.02, phase_strength: float | None = 0.01,
                 schedule=None, max_iters: int = 50):
        super().__init__(strength=strength, phase_strength=phase_strength,
                         schedule=schedule)
        self.max_iters = max_iters

    def denoise(self, img, strength):
        return tv_denoise(img, strength, self.max_iters)


class ExternalDenoiser(Denoiser):
    """Subprocess-backed prior speaking the file protocol of this module."""

    kind = "external"

    def __init__(self, command=None, workdir: str | os.PathLike = ".",
                 strength: float = 0.05, phase_strength: float | None = None,
                 schedule=None, timeout: float = 60.0):
        super().__init__(strength=strength, phase_strength=phase_strength,
                         schedule=schedule)
        self.command = command
        self.workdir = workdir
        self.timeout = timeout

    def denoise(self, img, strength):
        if self.command is None:
            raise DenoiserSpecError("external denoiser has no command configured")
        return external_denoise(img, self.command, self.workdir, strength,
                                self.timeout)


_KINDS = {
    "identity": IdentityDenoiser,
    "tv": TvDenoiser,
    "external": ExternalDenoiser,
}


def make_denoiser(kind: str, **kwargs) -> Denoiser:
    """Construct a denoiser by kind name ("identity", "tv", "external")."""
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown denoiser kind {kind!r}") from None
    return cls(**kwargs)
