"""Trends of siamese pretraining on synthetic shapes.

Not collected by pytest. Trains for minutes, not seconds, and prints:

- linear probe accuracy from a randomly initialized backbone, one pretrained on
  gaussian noise and one pretrained on the shapes themselves, paired over seeds
- representation_std with and without stop-gradient
- epoch means of the pretraining loss

The slow tests in test_ssl_trends.py assert the same numbers.
"""

# %%
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd


src = str(Path(__file__).parent.parent) + "/src"

sys.path.insert(0, src)

import ssllab as sl


SEEDS = (0, 1, 2)
COLLAPSE_EPOCHS = 20


def run_config(seed: int, **overrides) -> sl.RunConfig:
    flat = {
        "seed": seed,
        "data.dataset": "synth_shapes",
        "data.image_size": (3, 16, 16),
        "data.num_items": 512,
        "data.test_items": 256,
        "data.classes": 4,
        "backbone.family": "resnet_small",
        "backbone.width_multiplier": 0.25,
        "backbone.depth": 1,
        "train.batch_size": 64,
        "train.epochs": 10,
        "train.projection_dim": 64,
    }
    flat.update(overrides)
    return sl.RunConfig.from_flat(flat)


def pretrain(config: sl.RunConfig, data: sl.DatasetSource | None = None) -> sl.TrainResult:
    if data is None:
        data = sl.load_split(config.data, "train", seed=config.seed)
    model = sl.build_siamese(
        config.backbone,
        projection_dim=config.train.projection_dim,
        seed=config.seed,
        stop_gradient=config.train.stop_gradient,
    )
    return sl.train_pretrain(model, data, config.train, policy=config.augment)


def probe_accuracy(config: sl.RunConfig, backbone) -> float:
    probe = sl.RunConfig.from_flat({**config.to_flat(), "train.regime": "probe", "train.epochs": 5})
    train = sl.load_split(probe.data, "train", seed=probe.seed)
    test = sl.load_split(probe.data, "test", seed=probe.seed, normalization=train.normalization)
    model = sl.Classifier(backbone, train.num_classes, rng=sl.make_rng(probe.seed, 2))
    result = sl.train_supervised(model, train, probe.train, seed=probe.seed)
    return sl.evaluate(result.model, test)["accuracy"]


def backbone_accuracies(seeds=SEEDS) -> pd.DataFrame:
    """Probe accuracy per seed of the random, gaussian and shapes backbones."""
    rows = []
    for seed in seeds:
        config = run_config(seed)
        noise = sl.synth_gaussian(config.data.num_items, config.data.image_size, seed=seed)
        backbones = {
            "random": sl.build_backbone(config.backbone, seed=seed),
            "gaussian": pretrain(config, noise).model.backbone,
            "shapes": pretrain(config).model.backbone,
        }
        row = {"seed": seed}
        for name, backbone in backbones.items():
            row[name] = probe_accuracy(config, backbone)
        rows.append(row)
    return pd.DataFrame(rows)


def collapse_contrast(seeds=SEEDS) -> pd.DataFrame:
    """Final eval-mode representation_std with and without stop-gradient.

    A run that stops with CollapseError counts as a std of 0.
    """
    rows = []
    for seed in seeds:
        for stop_gradient in (True, False):
            config = run_config(
                seed, **{"train.stop_gradient": stop_gradient, "train.epochs": COLLAPSE_EPOCHS}
            )
            try:
                std = pretrain(config).runlog.last("representation_std", sl.MONITOR_SPLIT)
            except sl.CollapseError as e:
                print(e)
                std = 0.0
            rows.append(
                {
                    "seed": seed,
                    "stop_gradient": stop_gradient,
                    "representation_std": std,
                    "dim": config.train.projection_dim,
                }
            )
    return pd.DataFrame(rows)


def loss_curve(seed: int = 0) -> pd.Series:
    """Epoch means of the pretraining loss."""
    return pretrain(run_config(seed, **{"train.epochs": COLLAPSE_EPOCHS})).runlog.epoch_means()


def not_test_pretraining_beats_random_init():
    df = backbone_accuracies()
    print(df)
    for name in ("gaussian", "shapes"):
        diff = df[name] - df["random"]
        print(f"{name} - random: mean {diff.mean():.4f}, better in {(diff > 0).sum()} of {len(df)}")


def not_test_stop_gradient_prevents_collapse():
    df = collapse_contrast()
    print(df.pivot(index="seed", columns="stop_gradient", values="representation_std"))
    print("1/sqrt(d) =", 1 / np.sqrt(df["dim"].iloc[0]))


def not_test_loss_curve():
    means = loss_curve()
    print(means)
    print("final epoch mean", means.iloc[-1], "monotone", means.is_monotonic_decreasing)


def main():
    warnings.filterwarnings(action="ignore", category=UserWarning)
    not_test_pretraining_beats_random_init()
    not_test_stop_gradient_prevents_collapse()
    not_test_loss_curve()


if __name__ == "__main__":
    main()
