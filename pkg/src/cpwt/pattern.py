"""Oriented-gradient texture codes and their wavelet-reduced histograms.

The descriptor runs: 5x5 smoothing convolution -> per-pixel gradient
magnitude and orientation -> magnitudes accumulated into four 45-degree
orientation bins over a 5x5 window -> the two strongest bin responses
(gamma1 >= gamma2) gate which of the 8 neighbor differences light up a
bit -> one byte code per pixel -> single-level 2x2 averaging reduction ->
256-bin code histogram.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Outer product of the binomial row [1, 4, 6, 4, 1], normalized to sum 1.
# All weights are dyadic rationals (k/256), so integer frames convolve
# exactly in float64.
_BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0])
DEFAULT_CONV_MASK = np.outer(_BINOMIAL, _BINOMIAL) / 256.0

# Orientation bin labels in degrees; bin k covers (label - 45, label],
# which partitions the gradient-angle range (-90, +90].
ORIENTATION_ANGLES = (-45.0, 0.0, 45.0, 90.0)

# Half-extent of the magnitude accumulation window (5x5).
WINDOW_HALF = 2

# 8-neighborhood in row-major order; bit i of a code answers for offset i,
# least significant bit first.
NEIGHBOR_OFFSETS = (
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
)

N_CODES = 256


class GradientField(NamedTuple):
    magnitude: np.ndarray
    orientation: np.ndarray


class ProgressionMaps(NamedTuple):
    """Strongest and second-strongest orientation response per pixel."""

    first: np.ndarray
    second: np.ndarray


class ExtractResult(NamedTuple):
    feature: np.ndarray
    pattern: np.ndarray


@dataclass
class PatternConfig:
    """Knobs for the descriptor; defaults reproduce the standard pipeline."""

    conv_mask: np.ndarray = field(default_factory=lambda: DEFAULT_CONV_MASK.copy())
    normalize: bool = True


def _check_conv_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (5, 5):
        raise ValueError(f"convolution mask must be 5x5, got shape {mask.shape}")
    if not np.all(np.isfinite(mask)):
        raise ValueError("convolution mask contains non-finite entries")
    if abs(mask.sum() - 1.0) > 1e-9:
        raise ValueError("convolution mask entries must sum to 1")
    return mask


def convolve5(frame: np.ndarray, mask: np.ndarray = DEFAULT_CONV_MASK) -> np.ndarray:
    """Smooth with a 5x5 sum-one mask; edges replicate so shape is kept."""
    frame = np.asarray(frame, dtype=np.float64)
    mask = _check_conv_mask(mask)
    if frame.ndim != 2 or frame.shape[0] < 5 or frame.shape[1] < 5:
        raise ValueError("frame must be at least 5x5")
    padded = np.pad(frame, WINDOW_HALF, mode="edge")
    windows = sliding_window_view(padded, (5, 5))
    return np.einsum("ijkl,kl->ij", windows, mask)


def gradient(convolved: np.ndarray) -> GradientField:
    """Central-difference gradient: magnitude and angle in (-90, +90] degrees.

    The angle is atan(gx / gy).  Where the row gradient vanishes a nonzero
    column gradient maps to +90 (the -90 endpoint is excluded); a fully
    flat point gets angle 0.
    """
    convolved = np.asarray(convolved, dtype=np.float64)
    gy = np.gradient(convolved, axis=0)
    gx = np.gradient(convolved, axis=1)
    magnitude = np.hypot(gx, gy)
    orientation = np.zeros_like(convolved)
    nonzero = gy != 0.0
    orientation[nonzero] = np.degrees(np.arctan(gx[nonzero] / gy[nonzero]))
    orientation[(gy == 0.0) & (gx != 0.0)] = 90.0
    return GradientField(magnitude=magnitude, orientation=orientation)


def _box_sum(values: np.ndarray) -> np.ndarray:
    # 5x5 window sum with zero padding: windows hanging over the border
    # simply lose those taps.
    padded = np.pad(values, WINDOW_HALF, mode="constant")
    windows = sliding_window_view(padded, (5, 5))
    return windows.sum(axis=(2, 3))


def quantize_orientations(field: GradientField) -> np.ndarray:
    """Accumulate gradient magnitude into the four orientation bins.

    Returns an array of shape (4, H, W): per bin, the 5x5 windowed sum of
    the magnitudes of pixels whose angle falls in that bin.
    """
    magnitude, orientation = field
    maps = np.empty((len(ORIENTATION_ANGLES),) + magnitude.shape)
    for k, upper in enumerate(ORIENTATION_ANGLES):
        in_bin = (orientation > upper - 45.0) & (orientation <= upper)
        maps[k] = _box_sum(np.where(in_bin, magnitude, 0.0))
    return maps


def top_two(maps: np.ndarray) -> ProgressionMaps:
    """Per pixel, the largest and second-largest of the four bin responses."""
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim != 3 or maps.shape[0] != len(ORIENTATION_ANGLES):
        raise ValueError("expected orientation maps of shape (4, H, W)")
    ordered = np.sort(maps, axis=0)
    return ProgressionMaps(first=ordered[-1], second=ordered[-2])


def encode(convolved: np.ndarray, progression: ProgressionMaps) -> np.ndarray:
    """Turn neighbor differences into byte codes gated by (gamma2, gamma1].

    Bit i of the code at pixel p is 1 when the i-th neighbor of p (row-major
    8-neighborhood, LSB first) exceeds p on the smoothed frame by more than
    gamma2 but by no more than gamma1.  A border of width 2 stays 0.
    """
    convolved = np.asarray(convolved, dtype=np.float64)
    first, second = progression
    if convolved.shape != first.shape or convolved.shape != second.shape:
        raise ValueError("progression maps must match the frame shape")
    h, w = convolved.shape
    codes = np.zeros((h, w), dtype=np.uint8)
    if h < 2 * WINDOW_HALF + 1 or w < 2 * WINDOW_HALF + 1:
        return codes
    m = WINDOW_HALF
    center = convolved[m : h - m, m : w - m]
    gamma1 = first[m : h - m, m : w - m]
    gamma2 = second[m : h - m, m : w - m]
    acc = np.zeros(center.shape, dtype=np.int64)
    for bit, (dy, dx) in enumerate(NEIGHBOR_OFFSETS):
        neighbor = convolved[m + dy : h - m + dy, m + dx : w - m + dx]
        diff = neighbor - center
        hit = (diff > gamma2) & (diff <= gamma1)
        acc |= hit.astype(np.int64) << bit
    codes[m : h - m, m : w - m] = acc.astype(np.uint8)
    return codes


def haar_reduce(values: np.ndarray) -> np.ndarray:
    """Single-level 2x2 block average; odd edges replicate the last row/col."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise ValueError("expected a non-empty 2-D array")
    pad_h = values.shape[0] % 2
    pad_w = values.shape[1] % 2
    if pad_h or pad_w:
        values = np.pad(values, ((0, pad_h), (0, pad_w)), mode="edge")
    return (
        values[0::2, 0::2]
        + values[0::2, 1::2]
        + values[1::2, 0::2]
        + values[1::2, 1::2]
    ) / 4.0


def histogram(reduced: np.ndarray, normalize: bool = True) -> np.ndarray:
    """256-bin histogram of rounded code values; normalized to sum 1."""
    values = np.rint(np.asarray(reduced, dtype=np.float64)).astype(np.int64).ravel()
    if values.size == 0:
        raise ValueError("cannot build a histogram from an empty array")
    if values.min() < 0 or values.max() > N_CODES - 1:
        raise ValueError("code values outside [0, 255]")
    hist = np.bincount(values, minlength=N_CODES).astype(np.float64)
    if normalize:
        hist /= hist.sum()
    return hist


def extract(frame: np.ndarray, config: PatternConfig | None = None) -> ExtractResult:
    """Full descriptor for one frame: 256-d feature plus the code image."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2 or frame.shape[0] < 9 or frame.shape[1] < 9:
        raise ValueError("frame must be at least 9x9")
    cfg = config if config is not None else PatternConfig()
    convolved = convolve5(frame, cfg.conv_mask)
    field = gradient(convolved)
    maps = quantize_orientations(field)
    progression = top_two(maps)
    pattern_image = encode(convolved, progression)
    reduced = haar_reduce(pattern_image)
    feature = histogram(reduced, normalize=cfg.normalize)
    return ExtractResult(feature=feature, pattern=pattern_image)
