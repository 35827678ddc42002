"""Cellular-automaton noise filter driven by a Laplacian detection pass.

Every interior pixel is a cell with its 8 neighbors as the neighborhood.
The Laplacian transform of the frame exposes impulsive outliers; a cell
whose Laplacian response sits far from its neighborhood consensus is
replaced by the local boundary mean of the original frame, everything
else passes through untouched.  Borders are copied verbatim.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .metrics import mse_psnr  # noqa: F401  (filter quality is judged in PSNR terms)

DEFAULT_LAPLACIAN_MASK = np.array(
    [
        [0.0, 1.0, 0.0],
        [1.0, -4.0, 1.0],
        [0.0, 1.0, 0.0],
    ]
)


def _check_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (3, 3):
        raise ValueError(f"Laplacian mask must be 3x3, got shape {mask.shape}")
    if not np.all(np.isfinite(mask)):
        raise ValueError("Laplacian mask contains non-finite entries")
    if abs(mask.sum()) > 1e-9:
        raise ValueError("Laplacian mask entries must sum to 0")
    return mask


def laplacian_transform(
    frame: np.ndarray, mask: np.ndarray = DEFAULT_LAPLACIAN_MASK
) -> np.ndarray:
    """Correlate the frame with a 3x3 zero-sum mask; borders copy the input."""
    frame = np.asarray(frame, dtype=np.float64)
    mask = _check_mask(mask)
    if frame.ndim != 2 or frame.shape[0] < 3 or frame.shape[1] < 3:
        raise ValueError("frame must be at least 3x3")
    out = frame.copy()
    windows = sliding_window_view(frame, (3, 3))
    out[1:-1, 1:-1] = np.einsum("ijkl,kl->ij", windows, mask)
    return out


def boundary_mean(cell: np.ndarray) -> float:
    """Mean of the 8 boundary values of a 3x3 cell (center excluded)."""
    cell = np.asarray(cell, dtype=np.float64)
    if cell.shape != (3, 3):
        raise ValueError(f"cell must be 3x3, got shape {cell.shape}")
    return float((cell.sum() - cell[1, 1]) / 8.0)


def is_noisy(pixel: float, cell: np.ndarray) -> bool:
    """True when the pixel lies strictly outside its neighbors' min/max range."""
    cell = np.asarray(cell, dtype=np.float64)
    if cell.shape != (3, 3):
        raise ValueError(f"cell must be 3x3, got shape {cell.shape}")
    ring = np.delete(cell.ravel(), 4)
    return bool(pixel < ring.min() or pixel > ring.max())


def ca_filter(
    frame: np.ndarray, mask: np.ndarray = DEFAULT_LAPLACIAN_MASK
) -> np.ndarray:
    """One cellular-automaton update: detect outliers, repair from neighbors.

    The decision for each interior pixel compares, on the Laplacian
    transform, the distance between the cell's boundary mean and its
    center against the boundary mean of the original frame (the repair
    value itself).  Homogeneous regions never trip the rule, so constant
    frames are fixed points; isolated impulses exceed it and get replaced.
    Output is clamped to [0, 255].
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2 or frame.shape[0] < 3 or frame.shape[1] < 3:
        raise ValueError("frame must be at least 3x3")
    lap = laplacian_transform(frame, mask)

    lap_windows = sliding_window_view(lap, (3, 3))
    lap_center = lap[1:-1, 1:-1]
    lap_boundary = (lap_windows.sum(axis=(2, 3)) - lap_center) / 8.0

    src_windows = sliding_window_view(frame, (3, 3))
    center = frame[1:-1, 1:-1]
    repair = (src_windows.sum(axis=(2, 3)) - center) / 8.0

    noisy = np.abs(lap_boundary - lap_center) > repair
    out = frame.copy()
    out[1:-1, 1:-1] = np.where(noisy, repair, center)
    return np.clip(out, 0.0, 255.0)
