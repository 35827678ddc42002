"""One frame through the texture descriptor, stage by stage.

The descriptor smooths the frame, measures gradient orientation, keeps
the two strongest of four direction responses per pixel, turns neighbor
differences into byte codes gated by those responses, halves the code
image with a 2x2 block mean, and histograms the result into 256 bins.
"""

import numpy as np

from cpwt.pattern import (
    convolve5,
    encode,
    extract,
    gradient,
    haar_reduce,
    histogram,
    quantize_orientations,
    top_two,
)
from cpwt.synthetic import texture_frame

frame = texture_frame("stripes022", 64, period=8.0, phase=0.0)
print(f"frame: {frame.shape}, values {frame.min():.1f}..{frame.max():.1f}")

smoothed = convolve5(frame)
field = gradient(smoothed)
print(f"gradient magnitude: mean {field.magnitude.mean():.2f}")
print(
    "orientation range: "
    f"{field.orientation.min():.1f}..{field.orientation.max():.1f} degrees"
)

maps = quantize_orientations(field)
shares = maps.sum(axis=(1, 2)) / maps.sum()
print("direction mass (-45/0/45/90):", np.round(shares, 3))

progression = top_two(maps)
codes = encode(smoothed, progression)
print(f"codes: {codes.dtype}, {np.count_nonzero(codes)} nonzero pixels")

reduced = haar_reduce(codes)
feature = histogram(reduced)
print(f"reduced: {reduced.shape}, feature: {feature.shape}")

top_bins = np.argsort(feature)[::-1][:5]
print("five heaviest bins:", top_bins.tolist())
print("their mass:", np.round(feature[top_bins], 3))

# extract() runs the same chain in one call.
one_call, pattern = extract(frame)
assert np.array_equal(one_call, feature)
assert pattern.dtype == np.uint8
print("extract() reproduces the staged chain exactly")
