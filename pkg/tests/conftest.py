"""Shared fixtures: a tiny synthetic dataset and a cheap pipeline config.

The tiny dataset has two easily separable texture classes, three videos
each, three 32x32 frames per video.  It is generated once per session and
reused by the pipeline and CLI tests; unit tests build their own inputs.
"""

import pytest

from cpwt.pipeline import PipelineConfig
from cpwt.synthetic import generate_dataset

TINY_CLASSES = ("checker", "stripes022")


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny_data")
    generate_dataset(
        root,
        videos_per_class=3,
        frames_per_video=3,
        size=32,
        seed=7,
        class_names=TINY_CLASSES,
    )
    return root


def make_tiny_config(dataset_root, out_dir, **overrides) -> PipelineConfig:
    """Pipeline config scaled down until a full run takes a few seconds."""
    settings = dict(
        dataset_root=dataset_root,
        out_dir=out_dir,
        train_fraction=0.7,
        wolves=6,
        gwo_iters=8,
        epochs=2,
        batch=4,
        conv_filters=(2, 3),
        input_size=16,
    )
    settings.update(overrides)
    return PipelineConfig(**settings).validate()
