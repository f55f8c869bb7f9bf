"""Input validation helpers.

Small checks shared by the value types and the estimator classes. They raise
early with readable messages instead of letting numpy broadcast silently.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def as_2d_array(data, dtype, name: str = "data") -> np.ndarray:
    """Coerce ``data`` to a C-contiguous 2-D array of ``dtype`` (always copies).

    Grid value types (anything carrying a 2-D ``.data`` array) are unwrapped.
    """
    if isinstance(getattr(data, "data", None), np.ndarray):
        data = data.data
    arr = np.array(data, dtype=dtype, order="C", copy=True)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeError(f"{name} must be non-empty")
    return arr


def check_finite(arr: np.ndarray, name: str = "data") -> None:
    if np.iscomplexobj(arr):
        finite = np.isfinite(arr.real) & np.isfinite(arr.imag)
    else:
        finite = np.isfinite(arr)
    if not finite.all():
        raise ValueError(f"{name} contains non-finite samples")


def check_positive(value: float, name: str) -> None:
    if not (value > 0):
        raise ValueError(f"{name} must be > 0, got {value}")


def check_same_grid(a, b, names: tuple[str, str] = ("first", "second")) -> None:
    """Require two grid values to share dimensions and pitch."""
    if a.data.shape != b.data.shape:
        raise ShapeError(
            f"{names[0]} shape {a.data.shape} != {names[1]} shape {b.data.shape}"
        )
    if a.pitch != b.pitch:
        raise ShapeError(
            f"{names[0]} pitch {a.pitch} != {names[1]} pitch {b.pitch}"
        )


def check_divisible(shape: tuple[int, int], factor: int, name: str = "grid") -> None:
    h, w = shape
    if h % factor or w % factor:
        raise ShapeError(
            f"{name} dimensions {h}x{w} are not divisible by factor {factor}"
        )
