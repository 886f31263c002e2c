import sys
from pathlib import Path

import numpy as np
import pytest


src = str(Path(__file__).parent.parent) + "/src"

sys.path.insert(0, src)

import ssllab as sl


TINY_RESNET = dict(family="resnet_small", input_size=(3, 16, 16), width_multiplier=0.125, depth=1)
TINY_VIT = dict(family="vit_tiny", input_size=(3, 16, 16), embed_dim=16, depth=1, heads=2)
TINY_PIT = dict(family="pit_tiny", input_size=(3, 16, 16), embed_dim=8, depth=1, heads=2)


@pytest.fixture
def resnet_config() -> sl.BackboneConfig:
    return sl.BackboneConfig(**TINY_RESNET)


@pytest.fixture
def vit_config() -> sl.BackboneConfig:
    return sl.BackboneConfig(**TINY_VIT)


@pytest.fixture
def images() -> np.ndarray:
    return sl.make_rng(3).standard_normal((4, 3, 16, 16)).astype(np.float32)


def tiny_flat_config(out: Path | str, **overrides) -> dict:
    """Flat config of a run that trains in seconds on 16 x 16 synthetic shapes.

    Calling it as a function (not only through a fixture) lets the tests run
    outside of pytest as well.
    """
    flat = {
        "data.dataset": "synth_shapes",
        "data.image_size": (3, 16, 16),
        "data.num_items": 48,
        "data.test_items": 24,
        "data.classes": 2,
        "backbone.family": "resnet_small",
        "backbone.width_multiplier": 0.125,
        "backbone.depth": 1,
        "train.batch_size": 8,
        "train.accumulation": 2,
        "train.epochs": 1,
        "train.projection_dim": 16,
        "train.eval_batch_size": 32,
        "out": str(out),
    }
    flat.update(overrides)
    return flat


def tiny_config(out: Path | str, **overrides) -> sl.RunConfig:
    return sl.RunConfig.from_flat(tiny_flat_config(out, **overrides))


def write_config_file(path: Path, flat: dict) -> Path:
    path.write_text("".join(f"{key} = {value!r}\n" for key, value in flat.items()))
    return path
