"""Training, data and run configuration.

A run is configured by a flat text file of 'key = value' lines, e.g.::

    # pretrain a small resnet on synthetic shapes
    data.dataset = 'synth_shapes'
    backbone.family = 'resnet_small'
    backbone.width_multiplier = 0.25
    train.epochs = 5

Keys are '<block>.<field>' for the blocks backbone, augment, train and data, plus
the top-level keys seed, out, threads and init. Values are python literals; bare
words are read as strings.
"""
import ast
import dataclasses
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..backbones.config import BackboneConfig
from ..data.augment import AugmentationPolicy
from ..exceptions import ConfigError
from ..helpers import atomic_write_bytes


REGIMES = ("pretrain", "finetune", "probe")
LOSSES = ("cosine-symmetric", "cross-entropy", "binary-cross-entropy")
DATASETS = ("cifar10", "stl10", "synth_shapes", "synth_gaussian")
TASKS = ("single", "multilabel")

RESOLVED_CONFIG_FILE = "config.txt"


@dataclass
class TrainConfig:
    """Sets the optimization of a run.

    Args:
        regime: "pretrain" (siamese self-supervised), "finetune" (all weights) or
            "probe" (linear head on a frozen backbone).
        loss: Defaults to cosine-symmetric for pretraining, else cross-entropy or
            binary-cross-entropy depending on the task.
        batch_size: Images per micro-batch.
        accumulation: Micro-batches per optimizer step.
        epochs: Passes over the data.
        base_lr: Base learning rate. Pretraining scales it by the effective batch
            over 256, supervised runs use it as is.
        lr: Fixed learning rate, overriding the derivation above.
        weight_decay: L2 coefficient.
        decoupled_weight_decay: Decay weights directly instead of through the gradient.
        projection_dim: Output width of the projection head (divisible by 4).
        stop_gradient: Detach the projections in the siamese loss.
        projection_output_bn: Batch norm after the last projection layer.
        val_fraction: Share of the labeled train split held out for validation.
        augment_supervised: Use crop and flip in supervised runs.
        eval_batch_size: Images per batch in evaluation.
    """

    regime: str = "pretrain"
    loss: str | None = None
    batch_size: int = 64
    accumulation: int = 8
    epochs: int = 10
    base_lr: float = 1e-3
    lr: float | None = None
    weight_decay: float = 1e-5
    decoupled_weight_decay: bool = False
    projection_dim: int = 256
    stop_gradient: bool = True
    projection_output_bn: bool = False
    val_fraction: float = 0.1
    augment_supervised: bool = True
    eval_batch_size: int = 256

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}. Got {self.regime!r}")
        if self.loss is not None and self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}. Got {self.loss!r}")
        if self.regime == "pretrain" and self.loss not in (None, "cosine-symmetric"):
            raise ConfigError(f"Pretraining uses the cosine-symmetric loss. Got {self.loss!r}")
        for name in ("batch_size", "accumulation", "epochs", "eval_batch_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1. Got {getattr(self, name)}")
        if self.projection_dim < 4 or self.projection_dim % 4:
            raise ConfigError(
                f"projection_dim must be divisible by 4. Got {self.projection_dim}"
            )
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0. Got {self.weight_decay}")
        if not 0 < self.val_fraction < 1:
            raise ConfigError(f"val_fraction must be in (0, 1). Got {self.val_fraction}")

    @property
    def effective_batch(self) -> int:
        return self.batch_size * self.accumulation

    def loss_for(self, task: str) -> str:
        if self.loss is not None:
            return self.loss
        if self.regime == "pretrain":
            return "cosine-symmetric"
        return "binary-cross-entropy" if task == "multilabel" else "cross-entropy"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DataConfig:
    """Sets the dataset of a run.

    Args:
        dataset: "cifar10", "stl10", "synth_shapes" or "synth_gaussian".
        path: Folder of the binary files (cifar10 and stl10).
        pretrain_split: Split used for pretraining. Defaults to 'unlabeled' for
            stl10 and 'train' otherwise.
        num_items: Number of images of the synthetic datasets.
        image_size: (C, H, W) of the synthetic images.
        classes: Classes k, or attributes m if multilabel (synth_shapes).
        multilabel: Multi-label synth_shapes.
        test_items: Number of test images of the synthetic datasets.
    """

    dataset: str = "synth_shapes"
    path: str | None = None
    pretrain_split: str | None = None
    num_items: int = 512
    image_size: tuple[int, int, int] = (3, 32, 32)
    classes: int = 4
    multilabel: bool = False
    test_items: int = 256

    def __post_init__(self):
        self.image_size = tuple(int(x) for x in self.image_size)
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {DATASETS}. Got {self.dataset!r}")
        if self.dataset in ("cifar10", "stl10") and not self.path:
            raise ConfigError(f"data.path is required for {self.dataset}")
        if self.pretrain_split is None:
            self.pretrain_split = "unlabeled" if self.dataset == "stl10" else "train"

    @property
    def task(self) -> str:
        return "multilabel" if self.multilabel else "single"

    @property
    def input_size(self) -> tuple[int, int, int]:
        if self.dataset == "cifar10":
            return (3, 32, 32)
        if self.dataset == "stl10":
            return (3, 96, 96)
        return self.image_size

    def to_dict(self) -> dict:
        out = asdict(self)
        out["image_size"] = list(self.image_size)
        return out


_BLOCKS = {
    "backbone": BackboneConfig,
    "augment": AugmentationPolicy,
    "train": TrainConfig,
    "data": DataConfig,
}
# the run seed is used for the augmentation draws
_EXCLUDED = {("augment", "seed")}
_TOP_LEVEL = ("seed", "out", "threads", "init")


def parse_value(text: str):
    """A python literal, or the text itself if it is not one."""
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def read_config_file(path: str | Path) -> dict:
    """Flat dict of the 'key = value' lines of a config file.

    Raises:
        ConfigError: If a line has no '=' or a key is repeated.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    flat = {}
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in flat:
            raise ConfigError(f"{path}:{number}: key {key!r} is repeated")
        flat[key] = parse_value(value)
    return flat


def parse_overrides(overrides: list[str] | None) -> dict:
    """Flat dict of '--set key=value' overrides."""
    flat = {}
    for override in overrides or []:
        if "=" not in override:
            raise ConfigError(f"Overrides must be key=value. Got {override!r}")
        key, value = override.split("=", 1)
        flat[key.strip()] = parse_value(value)
    return flat


def known_keys() -> list[str]:
    keys = list(_TOP_LEVEL)
    for block, cls in _BLOCKS.items():
        keys += [f"{block}.{f.name}" for f in fields(cls) if (block, f.name) not in _EXCLUDED]
    return keys


@dataclass
class RunConfig:
    """The fully resolved configuration of one run.

    Examples
    --------
    >>> config = RunConfig.from_flat({"train.epochs": 1, "backbone.family": "vit_tiny"})
    >>> config.train.epochs, config.backbone.family
    (1, 'vit_tiny')
    >>> RunConfig.from_flat({"train.epoch": 1})
    Traceback (most recent call last):
    ...
    ssllab.exceptions.ConfigError: Unknown config key(s): train.epoch
    """

    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    augment: AugmentationPolicy = field(default_factory=AugmentationPolicy)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 0
    out: str = "runs/latest"
    threads: int | None = None
    init: str | None = None

    def __post_init__(self):
        if self.backbone.input_size != self.data.input_size:
            raise ConfigError(
                f"backbone.input_size {self.backbone.input_size} does not match the "
                f"{self.data.dataset} images {self.data.input_size}"
            )
        self.augment = dataclasses.replace(self.augment, seed=self.seed)

    @classmethod
    def from_flat(cls, flat: dict) -> "RunConfig":
        """Build from flat keys. Unknown keys raise ConfigError."""
        unknown = sorted(set(flat) - set(known_keys()))
        if unknown:
            raise ConfigError(f"Unknown config key(s): {', '.join(unknown)}")

        blocks = {block: {} for block in _BLOCKS}
        top = {}
        for key, value in flat.items():
            if key in _TOP_LEVEL:
                top[key] = value
            else:
                block, name = key.split(".", 1)
                blocks[block][name] = value

        data = DataConfig(**blocks["data"])
        # the backbone follows the dataset's image size unless it is set explicitly
        blocks["backbone"].setdefault("input_size", data.input_size)
        try:
            return cls(
                backbone=BackboneConfig(**blocks["backbone"]),
                augment=AugmentationPolicy(**blocks["augment"]),
                train=TrainConfig(**blocks["train"]),
                data=data,
                **top,
            )
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(
        cls,
        path: str | Path | None = None,
        overrides: list[str] | None = None,
        **top_level,
    ) -> "RunConfig":
        """Read a config file (optional), then apply '--set' overrides and top-level
        values such as seed or out. Values of None are ignored."""
        flat = read_config_file(path) if path else {}
        flat.update(parse_overrides(overrides))
        flat.update({key: value for key, value in top_level.items() if value is not None})
        return cls.from_flat(flat)

    def to_flat(self) -> dict:
        flat = {key: getattr(self, key) for key in _TOP_LEVEL}
        for block in _BLOCKS:
            for key, value in getattr(self, block).to_dict().items():
                if (block, key) in _EXCLUDED:
                    continue
                flat[f"{block}.{key}"] = tuple(value) if isinstance(value, list) else value
        return flat

    def to_text(self) -> str:
        return "".join(f"{key} = {value!r}\n" for key, value in self.to_flat().items())

    def write(self, folder: str | Path) -> Path:
        """Write the resolved config into 'folder' as config.txt."""
        path = Path(folder) / RESOLVED_CONFIG_FILE
        atomic_write_bytes(path, self.to_text().encode("utf-8"))
        return path
