"""The ssl-lab command line: pretrain, finetune, probe, eval and curves.

Every subcommand exits with 0 on success, 2 on input or config errors, 3 on
representation collapse and 4 on incompatible checkpoints.

Examples
--------
ssl-lab pretrain --config runs/shapes.txt --set train.epochs=1 --out runs/pre
ssl-lab probe --config runs/shapes.txt --init runs/pre/final.ckpt --out runs/probe
ssl-lab eval --checkpoint runs/probe/best.ckpt --config runs/shapes.txt
ssl-lab curves runs/pre/metrics.csv runs/pre-nostop/metrics.csv --out curves.svg
"""
import argparse
import functools
import sys
from collections.abc import Callable
from pathlib import Path

import pandas as pd

from .backbones.build import build_backbone
from .data.augment import AugmentationPolicy
from .exceptions import (
    CheckpointFormatError,
    CollapseError,
    ConfigError,
    CorruptCheckpointError,
    CorruptRecordError,
    DatasetFormatError,
    IncompatibleCheckpointError,
    LabelError,
    MetricsFormatError,
    ShapeError,
    UnlabeledSplitError,
)
from .helpers import resolve_threads
from .plotting.curves import write_curves
from .simsiam.siamese import build_siamese
from .tensor.creation import make_rng
from .training.checkpoint import (
    build_from_checkpoint,
    load_backbone_weights,
    read_checkpoint,
)
from .training.classifier import Classifier
from .training.config import RunConfig
from .training.runlog import RunLog
from .training.trainer import (
    MONITOR_SPLIT,
    evaluate,
    load_split,
    train_pretrain,
    train_supervised,
)


EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COLLAPSE = 3
EXIT_INCOMPATIBLE = 4

EVAL_FILE = "eval.csv"

_INPUT_ERRORS = (
    OSError,
    ConfigError,
    DatasetFormatError,
    CorruptRecordError,
    UnlabeledSplitError,
    LabelError,
    MetricsFormatError,
    CheckpointFormatError,
    CorruptCheckpointError,
    ShapeError,
)


def _error(message: str) -> None:
    print(f"ssl-lab: error: {message}", file=sys.stderr)


def returns_exit_code(func: Callable) -> Callable:
    """Map the exceptions of a subcommand to the stable exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except CollapseError as e:
            _error(str(e))
            return EXIT_COLLAPSE
        except IncompatibleCheckpointError as e:
            _error(f"incompatible checkpoint: {e}")
            return EXIT_INCOMPATIBLE
        except _INPUT_ERRORS as e:
            _error(str(e))
            return EXIT_INPUT

    return wrapper


def _prepare_out(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    config.write(out)
    return out


@returns_exit_code
def cmd_pretrain(config: RunConfig, verbose: bool = False) -> int:
    """Pretrain a siamese model and write checkpoints, metrics.csv and config.txt."""
    config.train.regime = "pretrain"
    out = _prepare_out(config)
    runlog = RunLog(verbose=verbose)
    data = load_split(config.data, config.data.pretrain_split, seed=config.seed)
    model = build_siamese(
        config.backbone,
        projection_dim=config.train.projection_dim,
        seed=config.seed,
        stop_gradient=config.train.stop_gradient,
        projection_output_bn=config.train.projection_output_bn,
    )
    try:
        result = train_pretrain(
            model,
            data,
            config.train,
            policy=config.augment,
            out_dir=out,
            runlog=runlog,
            threads=config.threads,
            verbose=verbose,
        )
    finally:
        runlog.flush(out)
    print(
        f"pretrained {config.backbone.family} on {data.name}: final loss "
        f"{runlog.last('loss'):.4f}, representation_std "
        f"{runlog.last('representation_std', MONITOR_SPLIT):.4f}, "
        f"checkpoint {result.final_checkpoint}"
    )
    return EXIT_OK


def _supervised(config: RunConfig, init: str | None, verbose: bool) -> int:
    out = _prepare_out(config)
    runlog = RunLog(verbose=verbose)
    train = load_split(config.data, "train", seed=config.seed)
    test = load_split(config.data, "test", seed=config.seed, normalization=train.normalization)

    backbone = build_backbone(config.backbone, seed=config.seed)
    if init and init != "random":
        checkpoint = read_checkpoint(init)
        load_backbone_weights(backbone, checkpoint)
        provenance = f"initialized from {checkpoint.path} sha256 {checkpoint.sha256}"
        runlog.note(provenance)
        print(provenance)
    else:
        runlog.note("initialized randomly")

    model = Classifier(
        backbone,
        train.num_classes,
        rng=make_rng(config.seed, 2),
        task=config.data.task,
    )
    policy = AugmentationPolicy.weak(config.seed) if config.train.augment_supervised else None
    try:
        result = train_supervised(
            model,
            train,
            config.train,
            policy=policy,
            out_dir=out,
            runlog=runlog,
            threads=config.threads,
            seed=config.seed,
            verbose=verbose,
        )
        metrics = evaluate(
            result.model, test, batch_size=config.train.eval_batch_size, threads=config.threads
        )
        runlog.record(config.train.epochs - 1, int(runlog.log["step"].max()), "test", metrics)
    finally:
        runlog.flush(out)
    shown = ", ".join(f"{key} {value:.4f}" for key, value in metrics.items())
    print(f"{config.train.regime} {config.backbone.family} on {test.name}: {shown}")
    return EXIT_OK


@returns_exit_code
def cmd_finetune(config: RunConfig, init: str | None = None, verbose: bool = False) -> int:
    """Fine-tune all weights from random init or a checkpoint, then test."""
    config.train.regime = "finetune"
    return _supervised(config, init, verbose)


@returns_exit_code
def cmd_probe(config: RunConfig, init: str | None = None, verbose: bool = False) -> int:
    """Train a linear head on a frozen backbone, then test."""
    config.train.regime = "probe"
    return _supervised(config, init, verbose)


@returns_exit_code
def cmd_eval(
    checkpoint: str | Path,
    config: RunConfig,
    task: str | None = None,
    split: str = "test",
    out: str | Path | None = None,
) -> int:
    """Print and write the metrics of a classifier checkpoint on a labeled split.

    One accuracy for single-label data; macro and micro accuracy and AUC for
    multi-label data.
    """
    stored = read_checkpoint(checkpoint)
    if stored.kind != "classifier":
        raise IncompatibleCheckpointError(
            f"{checkpoint} holds a {stored.kind} model; eval needs a classifier."
        )
    if stored.backbone_config.input_size != config.data.input_size:
        raise IncompatibleCheckpointError(
            f"{checkpoint} expects images of shape {stored.backbone_config.input_size}, "
            f"{config.data.dataset} has {config.data.input_size}"
        )
    model = build_from_checkpoint(stored)
    source = load_split(config.data, split, seed=config.seed, normalization=stored.normalization)
    metrics = evaluate(
        model,
        source,
        task=task or model.task,
        batch_size=config.train.eval_batch_size,
        threads=config.threads,
    )
    table = pd.DataFrame([metrics])
    table.insert(0, "dataset", source.name)
    print(table.to_string(index=False))

    folder = Path(out) if out else Path(checkpoint).parent
    folder.mkdir(parents=True, exist_ok=True)
    table.to_csv(folder / EVAL_FILE, index=False, lineterminator="\n")
    return EXIT_OK


@returns_exit_code
def cmd_curves(paths: list[str | Path], out: str | Path) -> int:
    """Write an SVG of the loss curves of one or more runs and the merged CSV."""
    svg, csv = write_curves(paths, out)
    print(f"wrote {svg} and {csv}")
    return EXIT_OK


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key, repeatable",
    )
    parser.add_argument("--seed", type=int, help="seed of weights, data and views")
    parser.add_argument("--out", help="output folder")
    parser.add_argument(
        "--threads",
        type=int,
        help="worker threads, default $SSL_LAB_THREADS or 1",
    )
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssl-lab",
        description="Self-supervised siamese pretraining, fine-tuning and evaluation.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    _add_run_options(subparsers.add_parser("pretrain", help="siamese pretraining"))
    for name, text in (("finetune", "fine-tune all weights"), ("probe", "linear probe")):
        sub = subparsers.add_parser(name, help=text)
        _add_run_options(sub)
        sub.add_argument("--init", help="checkpoint to start from, or 'random'")

    sub = subparsers.add_parser("eval", help="evaluate a classifier checkpoint")
    _add_run_options(sub)
    sub.add_argument("--checkpoint", required=True)
    sub.add_argument("--task", choices=("single", "multilabel"))
    sub.add_argument("--split", default="test")

    sub = subparsers.add_parser("curves", help="plot loss curves of runs")
    sub.add_argument("csv", nargs="+", help="metrics.csv files")
    sub.add_argument("--out", required=True, help="SVG file")
    return parser


@returns_exit_code
def _resolve_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig.load(
        args.config,
        args.set,
        seed=args.seed,
        out=args.out,
        threads=resolve_threads(args.threads) if args.threads is not None else None,
        init=getattr(args, "init", None),
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "curves":
        return cmd_curves(args.csv, args.out)

    config = _resolve_config(args)
    if isinstance(config, int):
        return config

    if args.command == "pretrain":
        return cmd_pretrain(config, verbose=args.verbose)
    if args.command == "finetune":
        return cmd_finetune(config, init=config.init, verbose=args.verbose)
    if args.command == "probe":
        return cmd_probe(config, init=config.init, verbose=args.verbose)
    return cmd_eval(args.checkpoint, config, task=args.task, split=args.split, out=args.out)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
