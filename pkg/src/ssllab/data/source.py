"""In-memory image datasets with labels, normalization and seeded shuffling."""
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import train_test_split

from ..exceptions import ConfigError, LabelError, UnlabeledSplitError
from ..tensor.creation import make_rng


@dataclass(frozen=True)
class Normalization:
    """Per-channel standardization constants, (x - mean) / std."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self):
        if len(self.mean) != len(self.std):
            raise ConfigError("mean and std must have one value per channel.")
        if any(s <= 0 for s in self.std):
            raise ConfigError(f"std must be positive. Got {self.std}")

    def apply(self, images: np.ndarray) -> np.ndarray:
        """Standardize images of shape [..., C, H, W]."""
        mean = np.asarray(self.mean, dtype=np.float32)[:, None, None]
        std = np.asarray(self.std, dtype=np.float32)[:, None, None]
        return ((images - mean) / std).astype(np.float32)

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, data: dict) -> "Normalization":
        return cls(tuple(float(x) for x in data["mean"]), tuple(float(x) for x in data["std"]))

    @classmethod
    def identity(cls, channels: int) -> "Normalization":
        return cls((0.0,) * channels, (1.0,) * channels)


class DatasetSource:
    """A named split of images, optionally labeled.

    Pixels are kept as given (uint8 for the binary formats, float32 for the synthetic
    generators) and converted on access: uint8 is scaled to [0, 1], and 'get' also
    standardizes with the source's Normalization.

    Args:
        name: Name of the dataset split, e.g. 'cifar10-train'.
        pixels: Array of shape [N, C, H, W].
        labels: None for unlabeled splits, int class indices of shape [N] for
            single-label data, or 0/1 bits of shape [N, m] for multi-label data.
        value_range: Range of the raw pixel values, used to clip augmented views.
            None means unbounded (gaussian images).
        normalization: Standardization constants. Computed per channel from the
            data if not given.
        num_classes: Number of classes (k or m). Inferred from the labels if not given.
        seed: Seed of the shuffle order.
    """

    def __init__(
        self,
        name: str,
        pixels: np.ndarray,
        labels: np.ndarray | None = None,
        value_range: tuple[float, float] | None = (0.0, 1.0),
        normalization: Normalization | None = None,
        num_classes: int | None = None,
        seed: int = 0,
    ) -> None:
        if pixels.ndim != 4:
            raise ConfigError(f"pixels must be [N, C, H, W]. Got shape {pixels.shape}")
        self.name = name
        self._pixels = pixels
        self._labels = None if labels is None else np.asarray(labels)
        self.value_range = value_range
        self.seed = seed

        if self._labels is not None:
            if len(self._labels) != len(pixels):
                raise LabelError(
                    f"{len(self._labels)} labels for {len(pixels)} images in {name}"
                )
            if num_classes is None:
                num_classes = (
                    int(self._labels.max()) + 1
                    if self._labels.ndim == 1
                    else self._labels.shape[1]
                )
        self.num_classes = num_classes
        self.normalization = normalization or self.compute_normalization()

    @property
    def num_items(self) -> int:
        return len(self._pixels)

    @property
    def item_shape(self) -> tuple[int, int, int]:
        return tuple(self._pixels.shape[1:])

    @property
    def is_labeled(self) -> bool:
        return self._labels is not None

    @property
    def label_kind(self) -> str | None:
        if self._labels is None:
            return None
        return "single" if self._labels.ndim == 1 else "multilabel"

    @property
    def labels(self) -> np.ndarray:
        if self._labels is None:
            raise UnlabeledSplitError(f"The split '{self.name}' has no labels.")
        return self._labels

    def raw(self, indices: np.ndarray | int | slice | None = None) -> np.ndarray:
        """Float32 pixels in their raw range, before normalization."""
        pixels = self._pixels if indices is None else self._pixels[indices]
        if pixels.dtype == np.uint8:
            return pixels.astype(np.float32) / np.float32(255.0)
        return pixels.astype(np.float32, copy=False)

    def get(self, indices: np.ndarray | int | slice) -> np.ndarray:
        """Normalized float32 pixels."""
        return self.normalization.apply(self.raw(indices))

    def __len__(self) -> int:
        return self.num_items

    def compute_normalization(self, chunk_size: int = 4096) -> Normalization:
        """Per-channel mean and std over all pixels, accumulated in float64."""
        channels = self.item_shape[0]
        total = np.zeros(channels)
        total_sq = np.zeros(channels)
        count = 0
        for start in range(0, self.num_items, chunk_size):
            chunk = self.raw(slice(start, start + chunk_size)).astype(np.float64)
            total += chunk.sum(axis=(0, 2, 3))
            total_sq += (chunk**2).sum(axis=(0, 2, 3))
            count += chunk.shape[0] * chunk.shape[2] * chunk.shape[3]
        mean = total / count
        std = np.sqrt(np.maximum(total_sq / count - mean**2, 0.0))
        # constant channels (all-black fixtures) are left unscaled
        std = np.where(std > 1e-6, std, 1.0)
        return Normalization(tuple(mean.tolist()), tuple(std.tolist()))

    @property
    def normalized_range(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Per-channel bounds of normalized pixels, or None for unbounded sources."""
        if self.value_range is None:
            return None
        low, high = self.value_range
        mean = np.asarray(self.normalization.mean)
        std = np.asarray(self.normalization.std)
        return (low - mean) / std, (high - mean) / std

    def epoch_order(self, epoch: int, shuffle: bool = True) -> np.ndarray:
        """Permutation of all indices, reproducible from (seed, epoch)."""
        if not shuffle:
            return np.arange(self.num_items)
        return make_rng(self.seed, epoch).permutation(self.num_items)

    def batches(
        self,
        batch_size: int,
        epoch: int = 0,
        shuffle: bool = True,
        drop_last: bool = False,
    ) -> Iterator[np.ndarray]:
        """Index arrays that together visit every index exactly once."""
        order = self.epoch_order(epoch, shuffle)
        stop = len(order) - len(order) % batch_size if drop_last else len(order)
        for start in range(0, stop, batch_size):
            yield order[start : start + batch_size]

    def subset(self, indices: np.ndarray, name: str | None = None) -> "DatasetSource":
        """Subset that keeps the parent's normalization."""
        indices = np.asarray(indices)
        return DatasetSource(
            name or self.name,
            self._pixels[indices],
            None if self._labels is None else self._labels[indices],
            value_range=self.value_range,
            normalization=self.normalization,
            num_classes=self.num_classes,
            seed=self.seed,
        )

    def split(
        self, fraction: float = 0.1, seed: int = 0
    ) -> tuple["DatasetSource", "DatasetSource"]:
        """Hold out 'fraction' of the items, stratified by class for single-label data.

        Both parts keep the normalization of the full source.

        Returns:
            (train, validation) sources.
        """
        if not 0 < fraction < 1:
            raise ConfigError(f"fraction must be between 0 and 1. Got {fraction}")
        indices = np.arange(self.num_items)
        stratify = self._labels if self.label_kind == "single" else None
        train_idx, val_idx = train_test_split(
            indices, test_size=fraction, random_state=seed, stratify=stratify
        )
        return (
            self.subset(np.sort(train_idx), f"{self.name}-train"),
            self.subset(np.sort(val_idx), f"{self.name}-val"),
        )

    def with_normalization(self, normalization: Normalization) -> "DatasetSource":
        return DatasetSource(
            self.name,
            self._pixels,
            self._labels,
            value_range=self.value_range,
            normalization=normalization,
            num_classes=self.num_classes,
            seed=self.seed,
        )

    def __repr__(self) -> str:
        labels = self.label_kind or "unlabeled"
        return (
            f"{self.__class__.__name__}(name='{self.name}', num_items={self.num_items}, "
            f"item_shape={self.item_shape}, labels={labels})"
        )
