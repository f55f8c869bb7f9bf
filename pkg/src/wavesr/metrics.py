"""Image quality metrics and complex-field evaluation.

PSNR is 10*log10(peak^2 / MSE), capped at 100 dB when the MSE vanishes. SSIM
is the mean of the local structural-similarity map computed over interior
(fully-overlapping) windows with a Gaussian weight of sigma 1.5.

Intensity-only measurements pin a field only up to a global phase factor, so
phase metrics are computed after aligning the reconstruction's global phase
to the reference (least-squares optimal rotation); phase images are compared
wrapped to [-pi, pi) with peak 2*pi.
"""

from __future__ import annotations

import csv
import io as _io
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from . import fileio
from .errors import ShapeError
from .grids import ComplexField

PSNR_CAP_DB = 100.0


def _check_pair(reference: np.ndarray, test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if reference.shape != test.shape:
        raise ShapeError(f"shape mismatch: {reference.shape} vs {test.shape}")
    return reference, test


def psnr(reference, test, peak: float) -> float:
    """Peak signal-to-noise ratio in dB, clamped into [0, 100].

    Zero MSE returns the 100 dB cap; errors beyond the peak floor at 0.
    """
    reference, test = _check_pair(reference, test)
    if not peak > 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    mse = float(np.mean((reference - test) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(np.clip(10.0 * np.log10(peak**2 / mse), 0.0, PSNR_CAP_DB))


def _gaussian_kernel(window: int, sigma: float) -> np.ndarray:
    half = (window - 1) // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(reference, test, window: int = 11, k1: float = 0.01, k2: float = 0.03,
         peak: float = 1.0) -> float:
    """Mean local SSIM with a Gaussian window of sigma 1.5.

    Local moments are Gaussian-weighted over fully-contained windows; the map
    mean is the score. Identical inputs score exactly 1.0.
    """
    reference, test = _check_pair(reference, test)
    if window % 2 == 0 or window < 3:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if window > min(reference.shape):
        raise ShapeError(
            f"window {window} exceeds image extent {reference.shape}"
        )
    kernel = _gaussian_kernel(window, sigma=1.5)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2

    def local_mean(x):
        return convolve2d(x, kernel, mode="valid")

    mu_r = local_mean(reference)
    mu_t = local_mean(test)
    var_r = local_mean(reference * reference) - mu_r * mu_r
    var_t = local_mean(test * test) - mu_t * mu_t
    cov = local_mean(reference * test) - mu_r * mu_t
    score = ((2.0 * mu_r * mu_t + c1) * (2.0 * cov + c2)) / (
        (mu_r * mu_r + mu_t * mu_t + c1) * (var_r + var_t + c2)
    )
    return float(np.mean(score))


def global_phase_offset(test: np.ndarray, reference: np.ndarray) -> float:
    """Phase angle phi minimizing ||reference - exp(i*phi)*test||."""
    inner = np.vdot(test, reference)
    if inner == 0:
        return 0.0
    return float(np.angle(inner))


def align_global_phase(test: ComplexField, reference: ComplexField) -> ComplexField:
    """Rotate the test field's global phase onto the reference's register."""
    phi = global_phase_offset(test.data, reference.data)
    return ComplexField(test.data * np.exp(1j * phi), test.pitch)


@dataclass
class MetricsReport:
    """Quality metrics of one reconstruction, plus optional cell-count results."""

    psnr_amplitude: float
    psnr_phase: float
    ssim_amplitude: float
    ssim_phase: float
    cell_count: int | None = None
    counting_error: float | None = None

    CSV_FIELDS = ("psnr_amplitude", "psnr_phase", "ssim_amplitude",
                  "ssim_phase", "cell_count", "counting_error")

    def to_record(self) -> dict:
        rec = {
            "psnr_amplitude": f"{self.psnr_amplitude:.6f}",
            "psnr_phase": f"{self.psnr_phase:.6f}",
            "ssim_amplitude": f"{self.ssim_amplitude:.6f}",
            "ssim_phase": f"{self.ssim_phase:.6f}",
        }
        rec["cell_count"] = "" if self.cell_count is None else str(self.cell_count)
        rec["counting_error"] = ("" if self.counting_error is None
                                 else f"{self.counting_error:.6f}")
        return rec

    def save_kv(self, path: str | os.PathLike) -> None:
        fileio.write_kv(path, self.to_record())

    def csv_row(self) -> str:
        buf = _io.StringIO()
        writer = csv.writer(buf, lineterminator="")
        writer.writerow([self.to_record()[k] for k in self.CSV_FIELDS])
        return buf.getvalue()


def evaluate_field(recon: ComplexField, truth: ComplexField, align: bool = True,
                   amplitude_peak: float | None = None,
                   ssim_window: int = 11) -> MetricsReport:
    """Score a reconstructed field against ground truth.

    Amplitude PSNR peak defaults to the truth amplitude's maximum; phase PSNR
    uses wrapped phase with peak 2*pi. Global phase is aligned first unless
    disabled.
    """
    if recon.shape != truth.shape:
        raise ShapeError(f"shape mismatch: {recon.shape} vs {truth.shape}")
    if align:
        recon = align_global_phase(recon, truth)
    amp_r = np.abs(recon.data)
    amp_t = np.abs(truth.data)
    peak = float(amp_t.max()) if amplitude_peak is None else amplitude_peak
    if peak <= 0:
        peak = 1.0
    phase_r = fileio.wrap_phase(np.angle(recon.data))
    phase_t = fileio.wrap_phase(np.angle(truth.data))
    amp_span = float(amp_t.max() - amp_t.min()) or 1.0
    return MetricsReport(
        psnr_amplitude=psnr(amp_t, amp_r, peak),
        psnr_phase=psnr(phase_t, phase_r, 2.0 * np.pi),
        ssim_amplitude=ssim(amp_t, amp_r, window=ssim_window, peak=amp_span),
        ssim_phase=ssim(phase_t, phase_r, window=ssim_window, peak=2.0 * np.pi),
    )


def save_metrics_csv(path: str | os.PathLike, reports: dict[str, MetricsReport]) -> None:
    """Write labelled metric rows (label = algorithm or cell name)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("label",) + MetricsReport.CSV_FIELDS)
        for label, report in reports.items():
            rec = report.to_record()
            writer.writerow([label] + [rec[k] for k in MetricsReport.CSV_FIELDS])
