"""Command-line front end: stage subcommands over persisted artifacts.

Exit codes: 0 success, 2 bad configuration, 3 bad or missing data,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .errors import ConfigError, CpwtError, DataError
from .filtering import ca_filter
from .frames import load_frame, write_frame
from .pipeline import PipelineConfig, load_config
from .synthetic import generate_dataset


def _parse_mask9(text: str) -> np.ndarray:
    # argparse turns ArgumentTypeError into a usage error (exit code 2),
    # matching the ConfigError exit code for bad values elsewhere.
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse mask value: {exc}") from exc
    if len(values) != 9:
        raise argparse.ArgumentTypeError(
            f"laplacian mask needs 9 values, got {len(values)}"
        )
    return np.asarray(values, dtype=np.float64).reshape(3, 3)


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    for attr, name in (
        ("dataset_root", "dataset_root"),
        ("out_dir", "out_dir"),
        ("train_fraction", "train_fraction"),
        ("split_seed", "split_seed"),
        ("gwo_seed", "gwo_seed"),
        ("cnn_seed", "cnn_seed"),
        ("laplacian_mask", "laplacian_mask"),
        ("wolves", "wolves"),
        ("iters", "gwo_iters"),
        ("lr", "lr"),
        ("epochs", "epochs"),
        ("batch", "batch"),
        ("aggregate", "aggregate"),
        ("threads", "threads"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[name] = value
    if args.config:
        return load_config(args.config, **overrides)
    if "dataset_root" not in overrides or "out_dir" not in overrides:
        raise ConfigError("need --config, or both --dataset-root and --out-dir")
    return PipelineConfig(
        dataset_root=overrides.pop("dataset_root"),
        out_dir=overrides.pop("out_dir"),
        **overrides,
    ).validate()


def _cmd_preprocess(args: argparse.Namespace) -> None:
    if args.frame is not None:
        if args.out_frame is None:
            raise ConfigError("--frame also needs --out-frame")
        mask = args.laplacian_mask
        frame = load_frame(args.frame)
        if mask is None:
            filtered = ca_filter(frame)
        else:
            filtered = ca_filter(frame, mask)
        write_frame(args.out_frame, filtered)
        print(f"wrote {args.out_frame}")
        return
    config = _build_config(args)
    manifest = pipeline.stage_preprocess(config)
    n_frames = sum(len(v.frames) for v in manifest.videos)
    print(f"filtered {n_frames} frames into {config.out_dir / 'filtered'}")


def _cmd_extract(args: argparse.Namespace) -> None:
    config = _build_config(args)
    pipeline.stage_extract(config)
    print(f"wrote {config.out_dir / pipeline.FEATURES_FILE}")


def _cmd_select(args: argparse.Namespace) -> None:
    config = _build_config(args)
    mask = pipeline.stage_select(config)
    print(
        f"wrote {config.out_dir / pipeline.MASK_FILE} "
        f"({mask.n_selected}/{mask.dim} bins kept)"
    )


def _cmd_train(args: argparse.Namespace) -> None:
    config = _build_config(args)
    model = pipeline.stage_train(config)
    final = model.loss_history[-1] if model.loss_history else float("nan")
    print(f"wrote {config.out_dir / pipeline.MODEL_FILE} (final loss {final:.6f})")


def _cmd_eval(args: argparse.Namespace) -> None:
    config = _build_config(args)
    metrics_report = pipeline.stage_evaluate(config)
    print(
        f"wrote {config.out_dir / pipeline.REPORT_JSON} "
        f"(video accuracy {metrics_report.overall_accuracy:.4f})"
    )


def _cmd_run(args: argparse.Namespace) -> None:
    config = _build_config(args)
    record, metrics_report = pipeline.run_pipeline(config)
    total = sum(s["seconds"] for s in record.stages.values())
    print(
        f"pipeline finished in {total:.1f}s, "
        f"video accuracy {metrics_report.overall_accuracy:.4f}"
    )


def _cmd_report(args: argparse.Namespace) -> None:
    if args.config:
        out_dir = load_config(args.config).out_dir
    elif args.out_dir is not None:
        out_dir = Path(args.out_dir)
    else:
        raise ConfigError("need --config or --out-dir")
    name = pipeline.REPORT_JSON if args.format == "json" else pipeline.REPORT_CSV
    path = out_dir / name
    if not path.exists():
        raise DataError(f"report not found: {path} (run eval first)")
    sys.stdout.write(path.read_text())


def _cmd_generate(args: argparse.Namespace) -> None:
    root = generate_dataset(
        args.out,
        videos_per_class=args.videos,
        frames_per_video=args.frames,
        size=args.size,
        seed=args.seed,
    )
    print(f"generated dataset under {root}")


def _add_config_options(parser: argparse.ArgumentParser, *, seeds=(), extras=()):
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--dataset-root", type=Path, help="dataset directory")
    parser.add_argument("--out-dir", type=Path, help="artifact directory")
    parser.add_argument("--threads", type=int, help="worker threads")
    if "split" in seeds:
        parser.add_argument("--train-fraction", type=float)
        parser.add_argument("--split-seed", type=int)
    if "gwo" in seeds:
        parser.add_argument("--wolves", type=int)
        parser.add_argument("--iters", type=int)
        parser.add_argument("--seed", dest="gwo_seed", type=int)
    if "cnn" in seeds:
        parser.add_argument("--lr", type=float)
        parser.add_argument("--epochs", type=int)
        parser.add_argument("--batch", type=int)
        parser.add_argument("--seed", dest="cnn_seed", type=int)
    for extra in extras:
        if extra == "laplacian_mask":
            parser.add_argument(
                "--laplacian-mask",
                dest="laplacian_mask",
                type=_parse_mask9,
                help="nine comma-separated reals, row-major",
            )
        elif extra == "aggregate":
            parser.add_argument("--aggregate", choices=pipeline.AGGREGATES)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpwt",
        description="Texture-pattern video classification pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="filter frames (dataset or single frame)")
    _add_config_options(p, seeds=("split",), extras=("laplacian_mask",))
    p.add_argument("--frame", type=Path, help="filter one frame instead of a dataset")
    p.add_argument("--out-frame", type=Path, help="output path for --frame")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("extract", help="compute patterns and features")
    _add_config_options(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("select", help="pick feature bins on the train split")
    _add_config_options(p, seeds=("gwo",))
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("train", help="train the classifier")
    _add_config_options(p, seeds=("cnn",))
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate on the test split")
    _add_config_options(p, extras=("aggregate",))
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="run all stages in order")
    _add_config_options(
        p, seeds=("split", "gwo"), extras=("laplacian_mask", "aggregate")
    )
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--cnn-seed", dest="cnn_seed", type=int)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="print the evaluation report")
    p.add_argument("--config", type=Path)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("generate", help="write a synthetic benchmark dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--videos", type=int, default=20, help="videos per class")
    p.add_argument("--frames", type=int, default=10, help="frames per video")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_generate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CpwtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
