"""Cell segmentation and counting on reconstructed amplitude images.

Pipeline: threshold to foreground, fill holes, Euclidean distance transform,
pick distance peaks as markers, and grow watershed regions from them. Marker
selection is deterministic by construction: candidate maxima are visited in
(distance descending, row, column) order and greedily suppressed inside the
minimum separation radius, so ties never depend on memory layout or library
version.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.filters import threshold_otsu
from skimage.segmentation import watershed

from .errors import ConfigError
from .fileio import save_gray_png
from .validation import as_2d_array

THRESHOLD_MODES = ("otsu", "fixed")


@dataclass(frozen=True)
class LabelMap:
    """Integer label image; 0 is background, 1..n_labels are cells."""

    labels: np.ndarray
    n_labels: int

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self):
        return self.labels.shape


def binarize(image, mode: str = "otsu", threshold: float | None = None) -> np.ndarray:
    """Foreground mask by Otsu's method or a fixed cut."""
    img = as_2d_array(image, dtype=np.float64, name="image")
    if mode not in THRESHOLD_MODES:
        raise ConfigError(f"mode must be one of {THRESHOLD_MODES}, got {mode!r}")
    if mode == "fixed":
        if threshold is None:
            raise ConfigError("fixed thresholding needs an explicit threshold")
        return img > threshold
    if np.all(img == img.flat[0]):
        return np.zeros(img.shape, dtype=bool)
    return img > threshold_otsu(img)


def find_markers(distance: np.ndarray, mask: np.ndarray,
                 min_distance: int = 7) -> np.ndarray:
    """Label one marker per distance peak, at least min_distance apart.

    Candidates are local maxima of the distance map inside the mask; among
    candidates closer than min_distance the one with the larger distance wins,
    ties resolved toward the smaller (row, column).
    """
    if min_distance < 1:
        raise ConfigError(f"min_distance must be >= 1, got {min_distance}")
    footprint = np.ones((2 * min_distance + 1,) * 2, dtype=bool)
    local_max = (distance == ndimage.maximum_filter(
        distance, footprint=footprint, mode="constant", cval=0.0))
    local_max &= mask & (distance > 0)

    rows, cols = np.nonzero(local_max)
    if rows.size == 0:
        return np.zeros(distance.shape, dtype=np.int32)
    values = distance[rows, cols]
    order = np.lexsort((cols, rows, -values))

    markers = np.zeros(distance.shape, dtype=np.int32)
    kept_r: list[int] = []
    kept_c: list[int] = []
    limit_sq = float(min_distance) ** 2
    for idx in order:
        r, c = int(rows[idx]), int(cols[idx])
        ok = True
        for kr, kc in zip(kept_r, kept_c):
            if (r - kr) ** 2 + (c - kc) ** 2 < limit_sq:
                ok = False
                break
        if ok:
            kept_r.append(r)
            kept_c.append(c)
            markers[r, c] = len(kept_r)
    return markers


def watershed_segment(image, threshold_mode: str = "otsu",
                      threshold: float | None = None,
                      min_distance: int = 7) -> LabelMap:
    """Segment bright blobs into labeled cells.

    Touching blobs are split along the watershed of the negated distance
    transform seeded at the distance peaks.
    """
    img = as_2d_array(image, dtype=np.float64, name="image")
    mask = binarize(img, mode=threshold_mode, threshold=threshold)
    # 4-connectivity when filling so diagonal pinholes do not leak
    mask = ndimage.binary_fill_holes(
        mask, structure=ndimage.generate_binary_structure(2, 1))
    if not mask.any():
        return LabelMap(np.zeros(img.shape, dtype=np.int32), 0)

    distance = ndimage.distance_transform_edt(mask)
    markers = find_markers(distance, mask, min_distance=min_distance)
    n = int(markers.max())
    if n == 0:
        return LabelMap(np.zeros(img.shape, dtype=np.int32), 0)
    labels = watershed(-distance, markers, mask=mask)
    return LabelMap(labels.astype(np.int32), n)


def count_cells(labels: LabelMap, exclude_margin: bool = True) -> int:
    """Number of labeled cells, by default dropping any touching the border."""
    arr = labels.labels
    if labels.n_labels == 0:
        return 0
    if not exclude_margin:
        return labels.n_labels
    border = np.concatenate([arr[0, :], arr[-1, :], arr[:, 0], arr[:, -1]])
    touching = np.unique(border[border > 0])
    return labels.n_labels - int(touching.size)


def interior_labels(labels: LabelMap) -> np.ndarray:
    """Label ids that do not touch the image border, ascending."""
    arr = labels.labels
    all_ids = np.unique(arr[arr > 0])
    border = np.concatenate([arr[0, :], arr[-1, :], arr[:, 0], arr[:, -1]])
    touching = np.unique(border[border > 0])
    return np.setdiff1d(all_ids, touching)


def save_label_png(labels: LabelMap, path: str | os.PathLike) -> None:
    """16-bit grayscale label ids (0 = background)."""
    save_gray_png(labels.labels.astype(np.float64), path, bits=16,
                  vmin=0.0, vmax=float(max(labels.n_labels, 1)))


def save_label_overlay_png(labels: LabelMap, path: str | os.PathLike) -> None:
    """Color overlay where adjacent labels get visually distinct hues."""
    from PIL import Image

    arr = labels.labels
    rgb = np.zeros(arr.shape + (3,), dtype=np.uint8)
    if labels.n_labels > 0:
        # golden-angle hue stepping keeps neighboring ids far apart in hue
        ids = arr[arr > 0]
        hue = (ids.astype(np.float64) * 0.61803398875) % 1.0
        h6 = hue * 6.0
        x = (1.0 - np.abs(h6 % 2.0 - 1.0))
        sector = h6.astype(int) % 6
        r = np.choose(sector, [1.0 + 0 * x, x, 0 * x, 0 * x, x, 1.0 + 0 * x])
        g = np.choose(sector, [x, 1.0 + 0 * x, 1.0 + 0 * x, x, 0 * x, 0 * x])
        b = np.choose(sector, [0 * x, 0 * x, x, 1.0 + 0 * x, 1.0 + 0 * x, x])
        fg = arr > 0
        rgb[fg, 0] = np.round(255 * r).astype(np.uint8)
        rgb[fg, 1] = np.round(255 * g).astype(np.uint8)
        rgb[fg, 2] = np.round(255 * b).astype(np.uint8)
    Image.fromarray(rgb, mode="RGB").save(Path(path), format="PNG")
