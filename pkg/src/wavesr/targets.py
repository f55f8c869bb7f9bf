"""Built-in test targets: natural images and synthetic cell scenes.

Two bundled 8-bit grayscale photographs provide amplitude and phase textures
for end-to-end runs; a deterministic disk-scene generator provides countable
cell images for the segmentation path.
"""

from __future__ import annotations

from importlib import resources

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ConfigError
from .grids import ComplexField
from .validation import as_2d_array

BUILTIN_IMAGES = ("camera", "moon")
_MASK64 = (1 << 64) - 1
_CELL_STREAM = 0xCE11


def load_builtin_image(name: str) -> np.ndarray:
    """Bundled grayscale test image as float64 in [0, 1]."""
    if name not in BUILTIN_IMAGES:
        raise ConfigError(
            f"unknown builtin image {name!r}; available: {BUILTIN_IMAGES}"
        )
    ref = resources.files("wavesr").joinpath("data", f"{name}.png")
    with ref.open("rb") as fh:
        img = np.asarray(Image.open(fh).convert("L"), dtype=np.float64)
    return img / 255.0


def resize_image(image, shape) -> np.ndarray:
    """Resample to ``shape``: exact block averaging when the source divides
    evenly, bilinear interpolation otherwise."""
    img = as_2d_array(image, dtype=np.float64, name="image")
    h, w = int(shape[0]), int(shape[1])
    if h < 1 or w < 1:
        raise ConfigError(f"target shape must be positive, got {shape}")
    if img.shape == (h, w):
        return img.copy()
    if img.shape[0] % h == 0 and img.shape[1] % w == 0:
        fh, fw = img.shape[0] // h, img.shape[1] // w
        return img.reshape(h, fh, w, fw).mean(axis=(1, 3))
    out = ndimage.zoom(img, (h / img.shape[0], w / img.shape[1]), order=1,
                       mode="nearest")
    # zoom sizes by rounding the scaled extent; force the exact request
    out = out[:h, :w]
    pad_h, pad_w = h - out.shape[0], w - out.shape[1]
    if pad_h > 0 or pad_w > 0:
        out = np.pad(out, ((0, pad_h), (0, pad_w)), mode="edge")
    return out


def rescale(image, bounds) -> np.ndarray:
    """Affinely map the image's own value range onto [bounds[0], bounds[1]]."""
    img = as_2d_array(image, dtype=np.float64, name="image")
    lo, hi = float(bounds[0]), float(bounds[1])
    if hi < lo:
        raise ConfigError(f"bounds must be ordered, got ({lo}, {hi})")
    span = img.max() - img.min()
    if span == 0.0:
        return np.full(img.shape, (lo + hi) / 2.0)
    return lo + (hi - lo) * (img - img.min()) / span


def make_target(shape, pitch: float, amplitude: str = "camera",
                phase: str = "moon", amplitude_range=(0.1, 1.0),
                phase_range=(-np.pi / 2, np.pi / 2)) -> ComplexField:
    """Complex field whose amplitude and phase come from two test images.

    Amplitude defaults to a range bounded away from zero so the phase stays
    well defined everywhere.
    """
    amp = rescale(resize_image(load_builtin_image(amplitude), shape),
                  amplitude_range)
    if amp.min() < 0:
        raise ConfigError(f"amplitude range must be nonnegative, got {amplitude_range}")
    pha = rescale(resize_image(load_builtin_image(phase), shape), phase_range)
    return ComplexField(amp * np.exp(1j * pha), pitch)


def synthetic_cells(shape=(256, 256), count: int = 70, seed: int = 0,
                    radius_range=(6, 11), min_gap: int = 4, margin: int = 3,
                    blur_sigma: float = 1.0, max_attempts: int | None = None,
                    return_centers: bool = False):
    """Scene of ``count`` bright disks, mutually separated and off the border.

    Placement is rejection sampling from a counter-based stream keyed on
    ``seed``, so the scene depends only on the arguments. Raises when the
    requested disks cannot be placed.
    """
    h, w = int(shape[0]), int(shape[1])
    r_lo, r_hi = float(radius_range[0]), float(radius_range[1])
    if not (1.0 <= r_lo <= r_hi):
        raise ConfigError(f"radius_range must satisfy 1 <= lo <= hi, got {radius_range}")
    if count < 0:
        raise ConfigError(f"count must be >= 0, got {count}")
    if 2.0 * (r_hi + margin) >= min(h, w):
        raise ConfigError(f"cells of radius {r_hi} do not fit a {h}x{w} scene")

    rng = np.random.Generator(
        np.random.Philox(key=[seed & _MASK64, _CELL_STREAM]))
    budget = max_attempts if max_attempts is not None else 2000 * max(count, 1)
    placed: list[tuple[float, float, float]] = []
    while len(placed) < count and budget > 0:
        budget -= 1
        r = rng.uniform(r_lo, r_hi)
        row = rng.uniform(r + margin, h - r - margin)
        col = rng.uniform(r + margin, w - r - margin)
        if all((row - pr) ** 2 + (col - pc) ** 2 >= (r + pradius + min_gap) ** 2
               for pr, pc, pradius in placed):
            placed.append((row, col, r))
    if len(placed) < count:
        raise ConfigError(
            f"could only place {len(placed)} of {count} cells in {h}x{w}"
        )

    yy, xx = np.mgrid[0:h, 0:w]
    img = np.zeros((h, w), dtype=np.float64)
    for row, col, r in placed:
        img[(yy - row) ** 2 + (xx - col) ** 2 <= r * r] = 1.0
    if blur_sigma > 0:
        img = ndimage.gaussian_filter(img, blur_sigma, mode="constant")
    if return_centers:
        return img, np.array(placed, dtype=np.float64).reshape(-1, 3)
    return img


def make_cells_target(shape, pitch: float, count: int = 70, seed: int = 0,
                      amplitude_range=(0.15, 1.0), phase_span: float = np.pi / 3,
                      **cell_kwargs) -> ComplexField:
    """Complex field of a cell scene: cells brighter and phase-advanced
    relative to the background."""
    scene = synthetic_cells(shape, count=count, seed=seed, **cell_kwargs)
    lo, hi = float(amplitude_range[0]), float(amplitude_range[1])
    if not (0 <= lo <= hi):
        raise ConfigError(f"amplitude range must be 0 <= lo <= hi, got {amplitude_range}")
    amp = lo + (hi - lo) * scene
    return ComplexField(amp * np.exp(1j * phase_span * scene), pitch)
