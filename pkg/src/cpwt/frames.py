"""Grayscale frame I/O and dataset bookkeeping.

A dataset on disk is ``root/<class>/<video>/frame_00000.pgm`` (or ``.png``).
Class and video directory names sort lexicographically; frame files sort by
filename within a video.  Everything downstream works on float64 arrays in
[0, 255] so integer pixel data stays exact.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError

FRAME_EXTENSIONS = (".pgm", ".png")

# Rec. 601 luma weights used to collapse RGB to gray.  Pillow's own "L"
# conversion rounds to uint8, so the weighted sum is done here in float.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

TRAIN = "train"
TEST = "test"


def load_frame(path: str | Path) -> np.ndarray:
    """Load one frame as a 2-D float64 array of gray levels in [0, 255].

    8-bit grayscale data is used as-is; 24-bit RGB is converted with the
    Rec. 601 weights without rounding.  Anything else is rejected.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"frame file not found: {path}")
    try:
        with Image.open(path) as image:
            image.load()
            mode = image.mode
            pixels = np.asarray(image, dtype=np.float64)
    except OSError as exc:
        raise DataError(f"cannot decode frame {path}: {exc}") from exc
    if mode == "L":
        gray = pixels
    elif mode == "RGB":
        gray = pixels @ np.asarray(LUMA_WEIGHTS, dtype=np.float64)
    else:
        raise DataError(f"unsupported image mode {mode!r} in {path}")
    if gray.ndim != 2 or gray.size == 0:
        raise DataError(f"frame {path} is not a 2-D image")
    return gray


def write_frame(path: str | Path, frame: np.ndarray) -> None:
    """Round a float frame to uint8 and write it as PGM/PNG (by suffix)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise ValueError("frame must be 2-D")
    data = np.rint(np.clip(frame, 0.0, 255.0)).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data, mode="L").save(path)


def validate_frame(frame: np.ndarray, min_size: int = 1) -> np.ndarray:
    """Check a frame is 2-D, finite, within [0, 255], and large enough."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise DataError("frame must be 2-D")
    if frame.shape[0] < min_size or frame.shape[1] < min_size:
        raise DataError(
            f"frame of shape {frame.shape} is smaller than {min_size}x{min_size}"
        )
    if not np.all(np.isfinite(frame)):
        raise DataError("frame contains non-finite values")
    if frame.min() < 0.0 or frame.max() > 255.0:
        raise DataError("frame values outside [0, 255]")
    return frame


@dataclass
class VideoEntry:
    """One video: its class, identifier, ordered frame paths, split tag."""

    class_index: int
    video_id: str
    frames: list[str]
    split: str | None = None

    def to_dict(self) -> dict:
        return {
            "class": self.class_index,
            "id": self.video_id,
            "frames": list(self.frames),
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VideoEntry":
        return cls(
            class_index=int(data["class"]),
            video_id=str(data["id"]),
            frames=[str(f) for f in data["frames"]],
            split=data.get("split"),
        )


@dataclass
class DatasetManifest:
    """Class names plus the video inventory, in canonical sorted order."""

    classes: list[str]
    videos: list[VideoEntry] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def videos_in_split(self, split: str) -> list[VideoEntry]:
        return [v for v in self.videos if v.split == split]

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "videos": [v.to_dict() for v in self.videos],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        return cls(
            classes=[str(c) for c in data["classes"]],
            videos=[VideoEntry.from_dict(v) for v in data["videos"]],
        )

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        if not path.exists():
            raise DataError(f"manifest not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"manifest {path} is not valid JSON: {exc}") from exc
        try:
            return cls.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"manifest {path} has unexpected structure: {exc}") from exc


def _subdirs(path: Path) -> list[str]:
    # os.listdir order is arbitrary; sorting here is what makes scans
    # reproducible across filesystems.
    return sorted(n for n in os.listdir(path) if (path / n).is_dir())


def scan_dataset(root: str | Path) -> DatasetManifest:
    """Walk ``root/<class>/<video>/<frame>`` and build the manifest.

    Raises DataError for an empty root, a class with no videos, or a video
    with no frame files.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root is not a directory: {root}")
    class_names = _subdirs(root)
    if not class_names:
        raise DataError(f"no class directories under {root}")
    manifest = DatasetManifest(classes=class_names)
    for class_index, class_name in enumerate(class_names):
        class_dir = root / class_name
        video_names = _subdirs(class_dir)
        if not video_names:
            raise DataError(f"class directory has no videos: {class_dir}")
        for video_name in video_names:
            video_dir = class_dir / video_name
            frame_names = sorted(
                n
                for n in os.listdir(video_dir)
                if (video_dir / n).is_file()
                and Path(n).suffix.lower() in FRAME_EXTENSIONS
            )
            if not frame_names:
                raise DataError(f"video directory has no frames: {video_dir}")
            manifest.videos.append(
                VideoEntry(
                    class_index=class_index,
                    video_id=f"{class_name}/{video_name}",
                    frames=[f"{class_name}/{video_name}/{n}" for n in frame_names],
                )
            )
    return manifest


def split_dataset(
    manifest: DatasetManifest, train_fraction: float, seed: int
) -> DatasetManifest:
    """Assign whole videos to train/test, per class, deterministically.

    Each class is shuffled and cut independently so no video's frames
    straddle the boundary.  round() sizes the train side; classes with at
    least two videos always keep one video on each side.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    out = DatasetManifest(classes=list(manifest.classes))
    out.videos = [
        VideoEntry(v.class_index, v.video_id, list(v.frames), v.split)
        for v in manifest.videos
    ]
    rng = random.Random(seed)
    for class_index in range(len(out.classes)):
        entries = [v for v in out.videos if v.class_index == class_index]
        if not entries:
            raise DataError(f"class {out.classes[class_index]!r} has no videos")
        order = list(range(len(entries)))
        rng.shuffle(order)
        n_train = round(train_fraction * len(entries))
        if len(entries) >= 2:
            n_train = min(max(n_train, 1), len(entries) - 1)
        train_set = set(order[:n_train])
        for position, entry in enumerate(entries):
            entry.split = TRAIN if position in train_set else TEST
    return out


def frame_index(name: str) -> int:
    """Numeric index embedded in a frame filename like frame_00012.pgm."""
    stem = Path(name).stem
    digits = "".join(ch for ch in stem if ch.isdigit())
    return int(digits) if digits else 0


def load_video_frames(root: str | Path, entry: VideoEntry) -> list[np.ndarray]:
    """Load every frame of one video, in manifest order."""
    root = Path(root)
    return [load_frame(root / rel) for rel in entry.frames]


def class_counts(manifest: DatasetManifest, split: str | None = None) -> list[int]:
    """Videos per class, optionally restricted to one split."""
    counts = [0] * manifest.n_classes
    for video in manifest.videos:
        if split is None or video.split == split:
            counts[video.class_index] += 1
    return counts
