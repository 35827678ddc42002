"""End-to-end pipeline: filter, extract, select, train, evaluate.

Each stage reads the previous stage's persisted artifacts from the output
directory and writes its own, so running stages one at a time through the
CLI and calling run_pipeline produce byte-identical files.  All randomness
flows through the three named seeds (split, gwo, cnn); reports carry no
timestamps, timings live only in the run record.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .cnn import CnnModel, TrainConfig, prepare_input, train_model
from .errors import ConfigError, CpwtError, DataError
from .filtering import DEFAULT_LAPLACIAN_MASK, _check_mask, ca_filter
from .frames import TRAIN, TEST, DatasetManifest, load_frame, scan_dataset, split_dataset, write_frame
from .gwo import FeatureMask, GwoConfig, select_features
from .metrics import MetricsReport, confusion, report, roc
from .pattern import DEFAULT_CONV_MASK, N_CODES, PatternConfig, _check_conv_mask, extract

THREADS_ENV = "CPWT_THREADS"

AGGREGATES = ("vote", "mean")

MANIFEST_FILE = "manifest.json"
FEATURES_FILE = "features.csv"
MASK_FILE = "mask.json"
MODEL_FILE = "model.json"
PREDICTIONS_FILE = "predictions.csv"
VIDEO_PREDICTIONS_FILE = "video_predictions.csv"
CONFUSION_FILE = "confusion.csv"
REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
ROC_DIR = "roc"
RUN_RECORD_FILE = "run_record.json"
FILTERED_DIR = "filtered"
PATTERNS_DIR = "patterns"


@dataclass
class PipelineConfig:
    """Everything a run needs; defaults reproduce the standard pipeline."""

    dataset_root: Path
    out_dir: Path
    train_fraction: float = 0.7
    split_seed: int = 101
    gwo_seed: int = 202
    cnn_seed: int = 303
    laplacian_mask: np.ndarray = field(
        default_factory=lambda: DEFAULT_LAPLACIAN_MASK.copy()
    )
    conv_mask: np.ndarray = field(default_factory=lambda: DEFAULT_CONV_MASK.copy())
    normalize: bool = True
    wolves: int = 20
    gwo_iters: int = 150
    gwo_threshold: float = 0.5
    sparsity_weight: float = 0.01
    lr: float = 0.01
    epochs: int = 15
    batch: int = 16
    conv_filters: tuple[int, int] = (8, 16)
    input_size: int = 64
    aggregate: str = "vote"
    threads: int | None = None

    def __post_init__(self) -> None:
        self.dataset_root = Path(self.dataset_root)
        self.out_dir = Path(self.out_dir)

    def validate(self) -> "PipelineConfig":
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        try:
            self.laplacian_mask = _check_mask(self.laplacian_mask)
            self.conv_mask = _check_conv_mask(self.conv_mask)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.wolves < 4:
            raise ConfigError("wolves must be >= 4")
        if self.gwo_iters < 1:
            raise ConfigError("iters must be >= 1")
        if not 0.0 < self.gwo_threshold < 1.0:
            raise ConfigError("threshold must be in (0, 1)")
        if self.sparsity_weight < 0.0:
            raise ConfigError("sparsity_weight must be >= 0")
        if self.lr <= 0.0:
            raise ConfigError("lr must be positive")
        if self.epochs < 1 or self.batch < 1:
            raise ConfigError("epochs and batch must be >= 1")
        if len(self.conv_filters) != 2 or min(self.conv_filters) < 1:
            raise ConfigError("filters must be two positive integers")
        if self.input_size < 16:
            raise ConfigError("input_size must be >= 16")
        if self.aggregate not in AGGREGATES:
            raise ConfigError(f"aggregate must be one of {AGGREGATES}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    def to_dict(self) -> dict:
        return {
            "dataset_root": str(self.dataset_root),
            "out_dir": str(self.out_dir),
            "train_fraction": self.train_fraction,
            "split_seed": self.split_seed,
            "gwo_seed": self.gwo_seed,
            "cnn_seed": self.cnn_seed,
            "laplacian_mask": np.asarray(self.laplacian_mask).tolist(),
            "conv_mask": np.asarray(self.conv_mask).tolist(),
            "normalize": self.normalize,
            "wolves": self.wolves,
            "gwo_iters": self.gwo_iters,
            "gwo_threshold": self.gwo_threshold,
            "sparsity_weight": self.sparsity_weight,
            "lr": self.lr,
            "epochs": self.epochs,
            "batch": self.batch,
            "conv_filters": list(self.conv_filters),
            "input_size": self.input_size,
            "aggregate": self.aggregate,
            "threads": self.threads,
        }


# (section, key) -> (constructor kwarg, converter)
_TOML_KEYS: dict[tuple[str, str], tuple[str, Callable]] = {
    ("dataset", "root"): ("dataset_root", Path),
    ("dataset", "train_fraction"): ("train_fraction", float),
    ("output", "dir"): ("out_dir", Path),
    ("seeds", "split"): ("split_seed", int),
    ("seeds", "gwo"): ("gwo_seed", int),
    ("seeds", "cnn"): ("cnn_seed", int),
    ("preprocess", "laplacian_mask"): (
        "laplacian_mask",
        lambda v: np.asarray(v, dtype=np.float64).reshape(3, 3),
    ),
    ("extract", "conv_mask"): (
        "conv_mask",
        lambda v: np.asarray(v, dtype=np.float64).reshape(5, 5),
    ),
    ("extract", "normalize"): ("normalize", bool),
    ("select", "wolves"): ("wolves", int),
    ("select", "iters"): ("gwo_iters", int),
    ("select", "threshold"): ("gwo_threshold", float),
    ("select", "sparsity_weight"): ("sparsity_weight", float),
    ("train", "lr"): ("lr", float),
    ("train", "epochs"): ("epochs", int),
    ("train", "batch"): ("batch", int),
    ("train", "filters"): ("conv_filters", lambda v: (int(v[0]), int(v[1]))),
    ("train", "input_size"): ("input_size", int),
    ("eval", "aggregate"): ("aggregate", str),
    ("run", "threads"): ("threads", int),
}


def load_config(path: str | Path, **overrides) -> PipelineConfig:
    """Build a validated config from a TOML file plus keyword overrides."""
    import tomli

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
    kwargs: dict = {}
    for section, table in data.items():
        if not isinstance(table, dict):
            raise ConfigError(f"top-level key {section!r} is not a section")
        for key, value in table.items():
            try:
                name, convert = _TOML_KEYS[(section, key)]
            except KeyError:
                raise ConfigError(f"unknown config key [{section}] {key}") from None
            try:
                kwargs[name] = convert(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {exc}") from exc
    for name, value in overrides.items():
        if value is not None:
            kwargs[name] = value
    if "dataset_root" not in kwargs:
        raise ConfigError("config must set [dataset] root")
    if "out_dir" not in kwargs:
        raise ConfigError("config must set [output] dir")
    return PipelineConfig(**kwargs).validate()


def resolve_threads(configured: int | None) -> int:
    """Worker count: configured value, capped by the CPWT_THREADS env var."""
    env_value = os.environ.get(THREADS_ENV)
    cap = None
    if env_value is not None:
        try:
            cap = int(env_value)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env_value!r}")
        if cap < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1, got {cap}")
    if configured is None:
        return cap if cap is not None else 1
    return min(configured, cap) if cap is not None else configured


def _parallel_map(fn: Callable, jobs: Sequence, threads: int) -> list:
    # Results come back in job order no matter how many workers run, so
    # artifact bytes cannot depend on scheduling.
    if threads <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def vote(frame_labels: Sequence[int]) -> int:
    """Modal label; ties resolve to the lowest class index."""
    labels = np.asarray(frame_labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("cannot vote over an empty label list")
    if labels.min() < 0:
        raise ValueError("labels must be non-negative")
    return int(np.argmax(np.bincount(labels)))


def _ordered_frames(manifest: DatasetManifest, split: str | None = None):
    for video in manifest.videos:
        if split is None or video.split == split:
            for index, rel in enumerate(video.frames):
                yield video, index, rel


def stage_preprocess(config: PipelineConfig) -> DatasetManifest:
    """Scan + split the dataset, then write filtered copies of every frame."""
    config.validate()
    manifest = scan_dataset(config.dataset_root)
    manifest = split_dataset(manifest, config.train_fraction, config.split_seed)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    manifest.save(config.out_dir / MANIFEST_FILE)
    jobs = [rel for _, _, rel in _ordered_frames(manifest)]

    def work(rel: str) -> None:
        frame = load_frame(config.dataset_root / rel)
        filtered = ca_filter(frame, config.laplacian_mask)
        write_frame(config.out_dir / FILTERED_DIR / rel, filtered)

    _parallel_map(work, jobs, resolve_threads(config.threads))
    return manifest


def _load_manifest(config: PipelineConfig) -> DatasetManifest:
    return DatasetManifest.load(config.out_dir / MANIFEST_FILE)


def stage_extract(config: PipelineConfig) -> None:
    """Compute pattern images and the feature CSV from the filtered frames."""
    config.validate()
    manifest = _load_manifest(config)
    pattern_cfg = PatternConfig(conv_mask=config.conv_mask, normalize=config.normalize)
    entries = list(_ordered_frames(manifest))

    def work(entry) -> np.ndarray:
        video, index, rel = entry
        filtered = load_frame(config.out_dir / FILTERED_DIR / rel)
        feature, pattern_image = extract(filtered, pattern_cfg)
        target = (config.out_dir / PATTERNS_DIR / rel).with_suffix(".pgm")
        write_frame(target, pattern_image)
        return feature

    features = _parallel_map(work, entries, resolve_threads(config.threads))
    header = ["video_id", "frame_index", "label"] + [f"b{i}" for i in range(N_CODES)]
    lines = [",".join(header)]
    for (video, index, rel), feature in zip(entries, features):
        row = [video.video_id, str(index), str(video.class_index)]
        row += [repr(float(v)) for v in feature]
        lines.append(",".join(row))
    (config.out_dir / FEATURES_FILE).write_text("\n".join(lines) + "\n")


def read_features(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray, np.ndarray]:
    """Read a feature CSV back: video ids, frame indices, labels, features."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"feature file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"feature file {path} is empty") from None
        expected = ["video_id", "frame_index", "label"] + [
            f"b{i}" for i in range(N_CODES)
        ]
        if header != expected:
            raise DataError(f"feature file {path} has an unexpected header")
        video_ids: list[str] = []
        frame_indices: list[int] = []
        labels: list[int] = []
        rows: list[list[float]] = []
        for row in reader:
            if len(row) != len(expected):
                raise DataError(f"feature file {path} has a malformed row")
            video_ids.append(row[0])
            frame_indices.append(int(row[1]))
            labels.append(int(row[2]))
            rows.append([float(v) for v in row[3:]])
    if not rows:
        raise DataError(f"feature file {path} has no data rows")
    return (
        video_ids,
        np.asarray(frame_indices, dtype=np.int64),
        np.asarray(labels, dtype=np.int64),
        np.asarray(rows, dtype=np.float64),
    )


def stage_select(config: PipelineConfig) -> FeatureMask:
    """Run the wrapper selector on training-video features; save the mask."""
    config.validate()
    manifest = _load_manifest(config)
    video_ids, _, labels, features = read_features(config.out_dir / FEATURES_FILE)
    train_videos = {v.video_id for v in manifest.videos_in_split(TRAIN)}
    in_train = np.asarray([vid in train_videos for vid in video_ids])
    if not in_train.any():
        raise DataError("no training rows found in the feature file")
    mask = select_features(
        features[in_train],
        labels[in_train],
        GwoConfig(
            wolves=config.wolves,
            iters=config.gwo_iters,
            seed=config.gwo_seed,
            threshold=config.gwo_threshold,
            sparsity_weight=config.sparsity_weight,
        ),
    )
    mask.save(config.out_dir / MASK_FILE)
    return mask


def _load_pattern(path: Path) -> np.ndarray:
    if not path.exists():
        raise DataError(f"pattern image not found: {path}")
    return load_frame(path)


def _video_inputs(
    config: PipelineConfig, manifest: DatasetManifest, mask: FeatureMask, split: str
) -> tuple[np.ndarray, np.ndarray, list]:
    """Stacked prepared inputs + labels for all frames of a split."""
    entries = list(_ordered_frames(manifest, split))
    if not entries:
        raise DataError(f"manifest has no {split} frames")

    def work(entry):
        video, index, rel = entry
        pattern = _load_pattern(
            (config.out_dir / PATTERNS_DIR / rel).with_suffix(".pgm")
        )
        return prepare_input(pattern, mask, size=config.input_size)

    inputs = _parallel_map(work, entries, resolve_threads(config.threads))
    labels = np.asarray([video.class_index for video, _, _ in entries], dtype=np.int64)
    return np.stack(inputs), labels, entries


def stage_train(config: PipelineConfig) -> CnnModel:
    """Train the classifier on masked train-split patterns; save model.json."""
    config.validate()
    manifest = _load_manifest(config)
    mask = FeatureMask.load(config.out_dir / MASK_FILE)
    inputs, labels, _ = _video_inputs(config, manifest, mask, TRAIN)
    model = train_model(
        inputs,
        labels,
        manifest.classes,
        TrainConfig(
            lr=config.lr, epochs=config.epochs, batch=config.batch, seed=config.cnn_seed
        ),
        conv_filters=config.conv_filters,
    )
    model.save(config.out_dir / MODEL_FILE)
    return model


def _format_float(value: float) -> str:
    return repr(float(value))


def stage_evaluate(config: PipelineConfig) -> MetricsReport:
    """Predict test frames, aggregate per video, and write all reports."""
    config.validate()
    manifest = _load_manifest(config)
    mask = FeatureMask.load(config.out_dir / MASK_FILE)
    model = CnnModel.load(config.out_dir / MODEL_FILE)
    if model.class_names != manifest.classes:
        raise DataError("model classes do not match the manifest")
    inputs, frame_labels, entries = _video_inputs(config, manifest, mask, TEST)
    predicted, probs = model.predict_batch(inputs)

    class_names = manifest.classes
    k = len(class_names)
    prob_header = [f"p_{name}" for name in class_names]
    frame_lines = [
        ",".join(["video_id", "frame_index", "actual", "predicted"] + prob_header)
    ]
    for (video, index, rel), label, p in zip(entries, predicted, probs):
        row = [video.video_id, str(index), str(video.class_index), str(int(label))]
        row += [_format_float(v) for v in p]
        frame_lines.append(",".join(row))
    (config.out_dir / PREDICTIONS_FILE).write_text("\n".join(frame_lines) + "\n")

    video_rows = []  # (video_id, actual, predicted, mean posterior vector)
    position = 0
    for video in manifest.videos_in_split(TEST):
        n = len(video.frames)
        frame_preds = predicted[position : position + n]
        video_probs = probs[position : position + n].mean(axis=0)
        position += n
        if config.aggregate == "vote":
            video_label = vote(frame_preds)
        else:
            video_label = int(np.argmax(video_probs))
        video_rows.append((video.video_id, video.class_index, video_label, video_probs))

    video_lines = [",".join(["video_id", "actual", "predicted"] + prob_header)]
    for video_id, actual, label, video_probs in video_rows:
        row = [video_id, str(actual), str(label)]
        row += [_format_float(v) for v in video_probs]
        video_lines.append(",".join(row))
    (config.out_dir / VIDEO_PREDICTIONS_FILE).write_text("\n".join(video_lines) + "\n")

    actual = np.asarray([r[1] for r in video_rows], dtype=np.int64)
    labels = np.asarray([r[2] for r in video_rows], dtype=np.int64)
    matrix = confusion(actual, labels, k)
    metrics_report = report(matrix, class_names)

    confusion_lines = [",".join(["class"] + list(class_names))]
    for name, row in zip(class_names, matrix):
        confusion_lines.append(",".join([name] + [str(int(v)) for v in row]))
    (config.out_dir / CONFUSION_FILE).write_text("\n".join(confusion_lines) + "\n")

    scores = np.stack([r[3] for r in video_rows])
    roc_dir = config.out_dir / ROC_DIR
    roc_dir.mkdir(parents=True, exist_ok=True)
    aucs: dict[str, float | None] = {}
    for class_index, name in enumerate(class_names):
        positive = actual == class_index
        if positive.all() or not positive.any():
            aucs[name] = None
            continue
        curve = roc(scores[:, class_index], positive)
        aucs[name] = curve.auc
        lines = ["threshold,fpr,tpr"]
        for threshold, fpr, tpr in zip(curve.thresholds, curve.fpr, curve.tpr):
            lines.append(
                ",".join([_format_float(threshold), _format_float(fpr), _format_float(tpr)])
            )
        (roc_dir / f"{Path(name).name}.csv").write_text("\n".join(lines) + "\n")
    defined = [v for v in aucs.values() if v is not None]
    report_data = metrics_report.to_dict()
    report_data["aggregate"] = config.aggregate
    report_data["roc_auc"] = aucs
    report_data["macro_auc"] = float(np.mean(defined)) if defined else None
    (config.out_dir / REPORT_JSON).write_text(json.dumps(report_data, indent=2) + "\n")
    (config.out_dir / REPORT_CSV).write_text(metrics_report.to_csv())
    return metrics_report


@dataclass
class RunRecord:
    """Wall-clock stage timings plus artifact inventory for one full run."""

    stages: dict[str, dict[str, float]]
    artifacts: dict[str, str]
    checksums: dict[str, str]
    config: dict

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "artifacts": self.artifacts,
            "checksums": self.checksums,
            "config": self.config,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


STAGES: tuple[tuple[str, Callable[[PipelineConfig], object]], ...] = (
    ("preprocess", stage_preprocess),
    ("extract", stage_extract),
    ("select", stage_select),
    ("train", stage_train),
    ("eval", stage_evaluate),
)


def run_pipeline(config: PipelineConfig) -> tuple[RunRecord, MetricsReport]:
    """All five stages in order; returns the run record and the metrics."""
    config.validate()
    timings: dict[str, dict[str, float]] = {}
    metrics_report: MetricsReport | None = None
    for name, stage in STAGES:
        start = time.time()
        tick = time.perf_counter()
        try:
            result = stage(config)
        except CpwtError as exc:
            raise type(exc)(f"stage {name}: {exc}") from exc
        seconds = time.perf_counter() - tick
        timings[name] = {
            "start": start,
            "end": start + seconds,
            "seconds": seconds,
        }
        if name == "eval":
            metrics_report = result
    artifacts = {
        "manifest": MANIFEST_FILE,
        "features": FEATURES_FILE,
        "mask": MASK_FILE,
        "model": MODEL_FILE,
        "predictions": PREDICTIONS_FILE,
        "video_predictions": VIDEO_PREDICTIONS_FILE,
        "confusion": CONFUSION_FILE,
        "report_json": REPORT_JSON,
        "report_csv": REPORT_CSV,
    }
    checksums: dict[str, str] = {}
    for path in sorted(config.out_dir.rglob("*")):
        if path.is_file() and path.name != RUN_RECORD_FILE:
            checksums[path.relative_to(config.out_dir).as_posix()] = _sha256(path)
    record = RunRecord(
        stages=timings,
        artifacts=artifacts,
        checksums=checksums,
        config=config.to_dict(),
    )
    record.save(config.out_dir / RUN_RECORD_FILE)
    assert metrics_report is not None
    return record, metrics_report
