"""Synthetic oriented-texture videos for benchmarks and demos.

Five classes: a checkerboard and sinusoidal stripes at four angles.  Each
video fixes a period and stripe phase; frames drift the phase so a video
looks like a slowly moving texture.  The stripe angles are chosen so the
gradient orientations (90 degrees minus the stripe angle) fall mid-bin in
the descriptor's four 45-degree orientation bins: orientations on a bin
boundary split their window mass between two bins on float jitter alone,
which floods the second-strongest response and erases the codes.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .frames import write_frame

CLASS_NAMES = ("checker", "stripes022", "stripes067", "stripes112", "stripes157")

STRIPE_ANGLES = {
    "stripes022": 22.5,
    "stripes067": 67.5,
    "stripes112": 112.5,
    "stripes157": 157.5,
}

AMPLITUDE = 90.0
MEAN_LEVEL = 127.5

# stripe bending: phase modulation across the stripe direction; the local
# orientation deviation stays near atan(WARP_AMP * period / WARP_LEN), so
# with periods up to 12 the bend is about 7 degrees, well inside a bin
WARP_AMP = 0.5
WARP_LEN = 48.0


def texture_frame(
    class_name: str,
    size: int,
    period: float,
    phase: float,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
    angle_deg: float | None = None,
    warp_phase: float | None = None,
) -> np.ndarray:
    """One float frame of the named texture, optionally with Gaussian noise.

    `angle_deg` overrides the class's nominal stripe angle; callers jitter
    it per video for within-class variety.  Jitter must stay well clear of
    the 45-degree orientation-bin boundaries (see module docstring).
    `warp_phase` switches on stripe bending, which diversifies the local
    stripe geometry without leaving the orientation bin.
    """
    if period <= 0:
        raise ValueError("period must be positive")
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    if class_name == "checker":
        wave = np.sin(2.0 * np.pi * xs / period + phase) * np.sin(
            2.0 * np.pi * ys / period + phase
        )
        values = MEAN_LEVEL + AMPLITUDE * np.sign(wave)
    elif class_name in STRIPE_ANGLES:
        theta = math.radians(
            STRIPE_ANGLES[class_name] if angle_deg is None else angle_deg
        )
        axis = xs * math.cos(theta) + ys * math.sin(theta)
        total_phase = phase
        if warp_phase is not None:
            perp = ys * math.cos(theta) - xs * math.sin(theta)
            total_phase = phase + WARP_AMP * np.sin(
                2.0 * np.pi * perp / WARP_LEN + warp_phase
            )
        values = MEAN_LEVEL + AMPLITUDE * np.sin(
            2.0 * np.pi * axis / period + total_phase
        )
    else:
        raise ValueError(f"unknown texture class {class_name!r}")
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise needs an rng")
        values = values + rng.normal(0.0, noise_sigma, values.shape)
    return np.clip(values, 0.0, 255.0)


def generate_dataset(
    root: str | Path,
    videos_per_class: int = 20,
    frames_per_video: int = 10,
    size: int = 64,
    seed: int = 0,
    noise_sigma: float = 0.0,
    impulse_density: float = 0.02,
    class_names: tuple[str, ...] = CLASS_NAMES,
) -> Path:
    """Write a `root/<class>/<video>/frame_%05d.pgm` tree; returns root.

    Frames carry impulse noise by default so the denoising stage has real
    work to do.  Fully deterministic for a given seed: every video derives
    its own rng from (seed, class index, video index).
    """
    root = Path(root)
    for class_index, class_name in enumerate(class_names):
        for video_index in range(videos_per_class):
            rng = np.random.default_rng((seed, class_index, video_index))
            angle = None
            if class_name in STRIPE_ANGLES:
                angle = STRIPE_ANGLES[class_name] + float(rng.uniform(-9.0, 9.0))
            video_dir = root / class_name / f"video{video_index:03d}"
            for frame_i in range(frames_per_video):
                # fresh period, phase, and bend per frame: the texture
                # flows and zooms over the video instead of sitting still
                period = float(rng.uniform(6.0, 12.0))
                phase = float(rng.uniform(0.0, 2.0 * np.pi))
                warp_phase = float(rng.uniform(0.0, 2.0 * np.pi))
                frame = texture_frame(
                    class_name,
                    size,
                    period,
                    phase,
                    noise_sigma,
                    rng,
                    angle_deg=angle,
                    warp_phase=warp_phase,
                )
                if impulse_density > 0.0:
                    frame = salt_pepper(frame, impulse_density, rng)
                write_frame(video_dir / f"frame_{frame_i:05d}.pgm", frame)
    return root


def salt_pepper(
    frame: np.ndarray, density: float, rng: np.random.Generator
) -> np.ndarray:
    """Corrupt a copy of the frame with impulse noise at the given density.

    Affected pixels flip to 0 or 255 with equal probability.
    """
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must be in [0, 1]")
    noisy = np.asarray(frame, dtype=np.float64).copy()
    hits = rng.random(noisy.shape) < density
    salt = rng.random(noisy.shape) < 0.5
    noisy[hits & salt] = 255.0
    noisy[hits & ~salt] = 0.0
    return noisy


def ramp_frame(size: int = 128, peak: float = 255.0) -> np.ndarray:
    """Diagonal intensity ramp from 0 to peak, the classic filter test card."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return peak * (xs + ys) / (2.0 * (size - 1))
