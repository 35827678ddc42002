"""Texture-pattern video classification: CA filtering, oriented-gradient
codes, wolf-pack feature selection, and a small from-scratch CNN."""

from .errors import ConfigError, CpwtError, DataError, NumericError
from .filtering import DEFAULT_LAPLACIAN_MASK, ca_filter, laplacian_transform
from .frames import (
    DatasetManifest,
    VideoEntry,
    load_frame,
    scan_dataset,
    split_dataset,
    write_frame,
)
from .gwo import FeatureMask, GwoConfig, optimize, select_features
from .cnn import CnnModel, TrainConfig, prepare_input, train_model
from .metrics import confusion, mse_psnr, report, roc
from .pattern import DEFAULT_CONV_MASK, ExtractResult, PatternConfig, extract
from .pipeline import PipelineConfig, run_pipeline, vote

__version__ = "0.1.0"

__all__ = [
    "CnnModel",
    "ConfigError",
    "CpwtError",
    "DEFAULT_CONV_MASK",
    "DEFAULT_LAPLACIAN_MASK",
    "DataError",
    "DatasetManifest",
    "ExtractResult",
    "FeatureMask",
    "GwoConfig",
    "NumericError",
    "PatternConfig",
    "PipelineConfig",
    "TrainConfig",
    "VideoEntry",
    "ca_filter",
    "confusion",
    "extract",
    "laplacian_transform",
    "load_frame",
    "mse_psnr",
    "optimize",
    "prepare_input",
    "report",
    "roc",
    "run_pipeline",
    "scan_dataset",
    "select_features",
    "split_dataset",
    "train_model",
    "vote",
    "write_frame",
]
