"""Shared fixtures and the acceptance-summary reporting hook."""

from __future__ import annotations

import numpy as np
import pytest

import wavesr as w

# Acceptance tests append one PASS/FAIL line each; the terminal-summary hook
# prints them after the run so they are visible regardless of output capture.
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def random_field(shape, seed: int, pitch: float = 1.4, lo: float = 0.2,
                 hi: float = 1.0) -> w.ComplexField:
    """Random complex field with amplitude bounded away from zero."""
    g = rng(seed)
    amp = g.uniform(lo, hi, size=shape)
    phase = g.uniform(-np.pi, np.pi, size=shape)
    return w.ComplexField(amp * np.exp(1j * phase), pitch)


def make_optics(theta: int, lr_pitch: float = 1.4, wavelength: float = 0.532,
                distance: float = 21550.0, pad_factor: int = 1) -> w.OpticalConfig:
    geom = w.SamplingGeometry.from_detector(theta, lr_pitch)
    return w.OpticalConfig(wavelength=wavelength, distance=distance,
                           geometry=geom, pad_factor=pad_factor)


def compact_field(seed: int, n: int = 128, pitch: float = 20.0,
                  envelope_sigma: float = 8.0) -> w.ComplexField:
    """Random field that is spectrally narrow and spatially compact.

    Built for pad-and-crop propagation checks: the spectrum is confined well
    inside the sampling band (so diffraction angles stay shallow) and a
    Gaussian envelope keeps the field far from the frame edge, so cropping
    after padded propagation discards negligible energy. Unit total energy.
    """
    g = rng(seed, stream=0xBA2D)
    spec = g.normal(size=(n, n)) + 1j * g.normal(size=(n, n))
    f = np.fft.fftfreq(n, d=pitch)
    fy, fx = f[:, None], f[None, :]
    sigma_f = (0.5 / pitch) / 6.0
    spec *= np.exp(-(fx**2 + fy**2) / (2.0 * sigma_f**2))
    data = np.fft.ifft2(spec)
    yy = np.arange(n)[:, None] - n / 2.0
    xx = np.arange(n)[None, :] - n / 2.0
    data *= np.exp(-(yy**2 + xx**2) / (2.0 * envelope_sigma**2))
    data /= np.sqrt(np.sum(np.abs(data) ** 2))
    return w.ComplexField(data, pitch)


@pytest.fixture
def small_setup():
    """16x16 target, theta=2, 4 masks: the cheapest full-pipeline instance."""
    optics = make_optics(theta=2)
    target = random_field((16, 16), seed=42, pitch=optics.geometry.hr_pitch)
    masks = w.generate_mask_set("iid-phase", 4, (16, 16),
                                optics.geometry.hr_pitch, seed=7)
    stack = w.simulate_measurements(target, masks, optics)
    return target, masks, optics, stack
