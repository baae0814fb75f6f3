"""8-bit binary PGM export for field heatmaps.

Amplitude panels are linearly min-max scaled; phase panels map the
principal branch (-pi, pi] onto 0..255 with phase 0 at pixel 128.
"""
from __future__ import annotations

import numpy as np

from .field import ComplexField


def write_pgm(path, grid: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM (P5, maxval 255)."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("PGM export needs a 2-D grid")
    data = grid.astype(np.uint8)
    h, w = data.shape
    try:
        with open(path, "wb") as f:
            f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            f.write(data.tobytes())
    except OSError:
        raise


def read_pgm(path) -> np.ndarray:
    """Read back a binary PGM written by :func:`write_pgm`."""
    with open(path, "rb") as f:
        blob = f.read()
    parts = blob.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != 255:
        raise ValueError("unsupported maxval")
    return np.frombuffer(parts[3][: w * h], dtype=np.uint8).reshape(h, w)


def amplitude_to_pixels(amp: np.ndarray) -> np.ndarray:
    """Linear min-max scaling to 0..255; constant grids map to 0."""
    amp = np.asarray(amp, dtype=np.float64)
    if not np.all(np.isfinite(amp)):
        raise ValueError("amplitude grid contains non-finite values")
    lo, hi = float(amp.min()), float(amp.max())
    if hi == lo:
        return np.zeros(amp.shape, dtype=np.uint8)
    return np.rint(255.0 * (amp - lo) / (hi - lo)).astype(np.uint8)


def phase_to_pixels(phase: np.ndarray) -> np.ndarray:
    """Affine map of (-pi, pi] onto 0..255 (phase 0 -> 128)."""
    phase = np.asarray(phase, dtype=np.float64)
    if not np.all(np.isfinite(phase)):
        raise ValueError("phase grid contains non-finite values")
    return np.rint(255.0 * (phase + np.pi) / (2.0 * np.pi)).astype(np.uint8)


def export_heatmaps(field, path_prefix) -> list[str]:
    """Write `<prefix>_amp.pgm` and `<prefix>_phase.pgm` for a field.

    Accepts a ComplexField or any 2-D array; real arrays get a constant
    phase panel.
    """
    if isinstance(field, ComplexField):
        values = field.values
    else:
        values = np.asarray(field)
    if np.iscomplexobj(values):
        amp = np.abs(values)
        phase = np.angle(values)
        phase = np.where(phase == -np.pi, np.pi, phase)
    else:
        amp = values.astype(np.float64)
        phase = np.zeros_like(amp)
    paths = [f"{path_prefix}_amp.pgm", f"{path_prefix}_phase.pgm"]
    write_pgm(paths[0], amplitude_to_pixels(amp))
    write_pgm(paths[1], phase_to_pixels(phase))
    return paths
