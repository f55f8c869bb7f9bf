"""Complex-field and intensity-grid value types plus resolution-change operators.

A high-resolution (HR) grid of pitch ``hr_pitch`` maps onto a low-resolution
(LR) detector grid of pitch ``theta * hr_pitch``: one detector pixel integrates
a ``theta x theta`` HR patch. Everything here is a pure function over immutable
values; the arrays are frozen after construction so instances can be shared
between workers.

Conventions fixed project-wide:
  * row-major ``(row, col)`` indexing;
  * complex samples are complex128, intensities float64;
  * pitch is micrometers per pixel;
  * detector binning SUMS the patch (photon bookkeeping is exact), it does
    not average.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .validation import (
    as_2d_array,
    check_divisible,
    check_finite,
    check_positive,
    check_same_grid,
)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """A 2-D grid of complex wavefront samples with a physical pixel pitch.

    Amplitude is dimensionless, phase in radians, pitch in micrometers.
    """

    data: np.ndarray
    pitch: float

    def __post_init__(self):
        arr = as_2d_array(self.data, np.complex128, "field data")
        check_finite(arr, "field data")
        check_positive(self.pitch, "pitch")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def amplitude(self) -> np.ndarray:
        return np.abs(self.data)

    def phase(self) -> np.ndarray:
        return np.angle(self.data)

    def intensity(self) -> "IntensityImage":
        return IntensityImage(np.abs(self.data) ** 2, self.pitch)


@dataclass(frozen=True, eq=False)
class IntensityImage:
    """A 2-D grid of real intensity samples (photon-count scale).

    Values are nonnegative unless ``allow_negative`` is set; that escape hatch
    exists only for additive-Gaussian-noise frames where the noise is kept
    zero-mean instead of being clamped at the detector floor.
    """

    data: np.ndarray
    pitch: float
    allow_negative: bool = field(default=False, compare=False)

    def __post_init__(self):
        arr = as_2d_array(self.data, np.float64, "intensity data")
        check_finite(arr, "intensity data")
        check_positive(self.pitch, "pitch")
        if not self.allow_negative and (arr < 0).any():
            raise ValueError("intensity data contains negative values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def total(self) -> float:
        return float(self.data.sum())


@dataclass(frozen=True)
class SamplingGeometry:
    """Integer undersampling between an HR target grid and the LR detector grid.

    ``lr_pitch`` is derived as ``theta * hr_pitch`` so the exact-ratio
    invariant holds by construction. The detector pitch is the primary
    physical datum, so the usual way in is :meth:`from_detector`.
    """

    theta: int
    hr_pitch: float

    def __post_init__(self):
        if int(self.theta) != self.theta or self.theta < 1:
            raise ValueError(f"theta must be an integer >= 1, got {self.theta}")
        object.__setattr__(self, "theta", int(self.theta))
        check_positive(self.hr_pitch, "hr_pitch")

    @classmethod
    def from_detector(cls, theta: int, lr_pitch: float) -> "SamplingGeometry":
        """Build from the detector pitch; the HR pitch is lr_pitch / theta."""
        check_positive(lr_pitch, "lr_pitch")
        return cls(theta=theta, hr_pitch=lr_pitch / theta)

    @property
    def lr_pitch(self) -> float:
        return self.theta * self.hr_pitch

    def check_hr_shape(self, shape: tuple[int, int]) -> None:
        check_divisible(shape, self.theta, "HR grid")


def hadamard_modulate(field: ComplexField, mask: ComplexField) -> ComplexField:
    """Elementwise product of a field with a modulation mask.

    Both operands must share dimensions and pitch.
    """
    check_same_grid(field, mask, ("field", "mask"))
    return ComplexField(field.data * mask.data, field.pitch)


def bin_intensity(hr: IntensityImage, geom: SamplingGeometry) -> IntensityImage:
    """Integrate each theta x theta HR patch into one LR detector pixel.

    The patch is summed, so the total image energy is conserved exactly.
    """
    t = geom.theta
    h, w = hr.shape
    if h % t or w % t:
        raise ShapeError(f"HR dimensions {h}x{w} not divisible by theta={t}")
    lr = hr.data.reshape(h // t, t, w // t, t).sum(axis=(1, 3))
    return IntensityImage(lr, hr.pitch * t, allow_negative=hr.allow_negative)


def upsample_replicate(
    lr: IntensityImage, geom: SamplingGeometry, normalize: bool = False
) -> IntensityImage:
    """Replicate each LR pixel over its theta x theta HR patch.

    With ``normalize`` the values are divided by theta**2, making this the
    right inverse of :func:`bin_intensity`.
    """
    t = geom.theta
    hr = np.repeat(np.repeat(lr.data, t, axis=0), t, axis=1)
    if normalize:
        hr = hr / (t * t)
    return IntensityImage(hr, lr.pitch / t, allow_negative=lr.allow_negative)


def bin_array(hr: np.ndarray, theta: int) -> np.ndarray:
    """Patch-sum a raw 2-D array (internal hot-path variant of bin_intensity)."""
    h, w = hr.shape
    return hr.reshape(h // theta, theta, w // theta, theta).sum(axis=(1, 3))


def upsample_array(lr: np.ndarray, theta: int, normalize: bool = False) -> np.ndarray:
    """Replicate a raw 2-D array over theta x theta patches."""
    hr = np.repeat(np.repeat(lr, theta, axis=0), theta, axis=1)
    if normalize:
        hr = hr / (theta * theta)
    return hr
