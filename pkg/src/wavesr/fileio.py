"""On-disk formats: raw float dumps with sidecar metadata, and PNG previews.

Dump format: little-endian 64-bit floats, row-major. Complex grids store
interleaved (real, imag) pairs per sample, i.e. the memory layout of
complex128. Each ``X.f64`` file has a sidecar ``X.meta`` holding a
human-readable key-value record: width, height, pitch_um, kind (real|complex).
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError
from .grids import ComplexField, IntensityImage

_REAL_DTYPE = np.dtype("<f8")
_COMPLEX_DTYPE = np.dtype("<c16")


def write_kv(path: str | os.PathLike, record: dict) -> None:
    """Write a flat ``key = value`` text record, one pair per line."""
    lines = [f"{k} = {v}\n" for k, v in record.items()]
    Path(path).write_text("".join(lines))


def read_kv(path: str | os.PathLike) -> dict[str, str]:
    """Read a flat key-value record written by :func:`write_kv`."""
    record: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: malformed line {raw!r}")
        key, value = line.split("=", 1)
        record[key.strip()] = value.strip()
    return record


def _meta_path(data_path: str | os.PathLike) -> Path:
    p = Path(data_path)
    return p.with_suffix(p.suffix + ".meta") if p.suffix != ".f64" else p.with_suffix(".meta")


def save_grid(grid: ComplexField | IntensityImage, path: str | os.PathLike) -> None:
    """Dump a grid as raw little-endian float64 data plus a sidecar record."""
    path = Path(path)
    complex_kind = isinstance(grid, ComplexField)
    dtype = _COMPLEX_DTYPE if complex_kind else _REAL_DTYPE
    path.write_bytes(np.ascontiguousarray(grid.data, dtype=dtype).tobytes())
    write_kv(
        _meta_path(path),
        {
            "width": grid.width,
            "height": grid.height,
            "pitch_um": repr(grid.pitch),
            "kind": "complex" if complex_kind else "real",
        },
    )


def load_grid(path: str | os.PathLike) -> ComplexField | IntensityImage:
    """Load a grid dumped by :func:`save_grid`."""
    path = Path(path)
    meta = read_kv(_meta_path(path))
    width = int(meta["width"])
    height = int(meta["height"])
    pitch = float(meta["pitch_um"])
    kind = meta["kind"]
    raw = path.read_bytes()
    if kind == "complex":
        data = np.frombuffer(raw, dtype=_COMPLEX_DTYPE)
    elif kind == "real":
        data = np.frombuffer(raw, dtype=_REAL_DTYPE)
    else:
        raise ConfigError(f"{path}: unknown grid kind {kind!r}")
    if data.size != width * height:
        raise ConfigError(
            f"{path}: payload has {data.size} samples, metadata says {width * height}"
        )
    data = data.reshape(height, width)
    if kind == "complex":
        return ComplexField(data, pitch)
    return IntensityImage(data, pitch, allow_negative=True)


def save_raw_real(array: np.ndarray, path: str | os.PathLike) -> None:
    """Dump a bare real 2-D array (no sidecar); used by the denoiser protocol."""
    Path(path).write_bytes(np.ascontiguousarray(array, dtype=_REAL_DTYPE).tobytes())


def load_raw_real(path: str | os.PathLike, shape: tuple[int, int]) -> np.ndarray:
    """Read back a bare real dump of known shape."""
    data = np.frombuffer(Path(path).read_bytes(), dtype=_REAL_DTYPE)
    if data.size != shape[0] * shape[1]:
        raise ConfigError(f"{path}: expected {shape[0] * shape[1]} samples, got {data.size}")
    return data.reshape(shape).copy()


def wrap_phase(phi: np.ndarray) -> np.ndarray:
    """Wrap phase values into [-pi, pi)."""
    return np.mod(phi + np.pi, 2 * np.pi) - np.pi


def _to_png_scale(values: np.ndarray, lo: float, hi: float, bits: int) -> np.ndarray:
    if bits not in (8, 16):
        raise ConfigError(f"PNG bit depth must be 8 or 16, got {bits}")
    top = (1 << bits) - 1
    if hi > lo:
        scaled = (values - lo) / (hi - lo)
    else:
        scaled = np.zeros_like(values)
    return np.round(np.clip(scaled, 0.0, 1.0) * top).astype(
        np.uint8 if bits == 8 else np.uint16
    )


def save_gray_png(values: np.ndarray, path: str | os.PathLike, bits: int = 8,
                  vmin: float | None = None, vmax: float | None = None) -> None:
    """Save a real 2-D array as 8- or 16-bit grayscale PNG, linearly scaled.

    With no explicit range the array's own [min, max] maps to full scale.
    """
    values = np.asarray(values, dtype=np.float64)
    lo = float(values.min()) if vmin is None else vmin
    hi = float(values.max()) if vmax is None else vmax
    quantized = _to_png_scale(values, lo, hi, bits)
    Image.fromarray(quantized).save(Path(path), format="PNG")


def export_amplitude_png(field: ComplexField | IntensityImage,
                         path: str | os.PathLike, bits: int = 8) -> None:
    """Amplitude preview: |field| (or the intensity values) scaled to [min, max]."""
    values = np.abs(field.data) if isinstance(field, ComplexField) else field.data
    save_gray_png(values, path, bits=bits)


def export_phase_png(field: ComplexField, path: str | os.PathLike, bits: int = 8) -> None:
    """Phase preview: wrapped to [-pi, pi) then scaled to full range."""
    save_gray_png(wrap_phase(np.angle(field.data)), path, bits=bits,
                  vmin=-np.pi, vmax=np.pi)
