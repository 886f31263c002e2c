"""Readers and writers of the CIFAR-10 and STL-10 binary formats.

CIFAR-10: records of 3073 bytes, one label byte (0-9) followed by 1024 red, 1024
green and 1024 blue bytes, each plane row-major.

STL-10: '<split>_X.bin' holds uint8 images of 3 x 96 x 96, each plane column-major;
'<split>_y.bin' holds one label byte (1-10) per image. The unlabeled split has no
label file.
"""
from pathlib import Path

import numpy as np

from ..exceptions import ConfigError, CorruptRecordError, DatasetFormatError
from ..helpers import atomic_write_bytes
from .source import DatasetSource, Normalization


CIFAR10_SHAPE = (3, 32, 32)
CIFAR10_RECORD_BYTES = 1 + 3 * 32 * 32
CIFAR10_FILES = {
    "train": [f"data_batch_{i}.bin" for i in range(1, 6)],
    "test": ["test_batch.bin"],
}
CIFAR10_FOLDER = "cifar-10-batches-bin"

STL10_SHAPE = (3, 96, 96)
STL10_IMAGE_BYTES = 3 * 96 * 96
STL10_SPLITS = ("train", "test", "unlabeled")
STL10_FOLDER = "stl10_binary"

NUM_CLASSES = 10


def _resolve_folder(path: str | Path, subfolder: str, expected: str) -> Path:
    """The given folder, or its official subfolder if the files are there."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"Dataset folder not found: {path}")
    if not (path / expected).exists() and (path / subfolder / expected).exists():
        return path / subfolder
    return path


def read_cifar10_records(file: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Parse one CIFAR-10 batch file.

    Returns:
        uint8 pixels of shape [N, 3, 32, 32] and int64 labels of shape [N].

    Raises:
        DatasetFormatError: If the file size is not a multiple of 3073 bytes.
        CorruptRecordError: If a label byte is above 9.
    """
    raw = np.fromfile(file, dtype=np.uint8)
    if not raw.size or raw.size % CIFAR10_RECORD_BYTES:
        raise DatasetFormatError(
            f"{file}: size {raw.size} bytes is not a positive multiple of "
            f"{CIFAR10_RECORD_BYTES}"
        )
    records = raw.reshape(-1, CIFAR10_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= NUM_CLASSES)
    if len(bad):
        raise CorruptRecordError(
            f"{file}: record {bad[0]} has label byte {labels[bad[0]]} (max 9)"
        )
    pixels = records[:, 1:].reshape(-1, *CIFAR10_SHAPE)
    return pixels, labels


def load_cifar10(
    path: str | Path,
    split: str = "train",
    normalization: Normalization | None = None,
    seed: int = 0,
) -> DatasetSource:
    """Load the train (50000 images) or test (10000 images) split of CIFAR-10.

    Args:
        path: Folder with the official binary batch files, or its parent.
        split: 'train' or 'test'.
        normalization: Standardization constants, e.g. those stored in a
            checkpoint. Computed from the split if not given.
        seed: Seed of the shuffle order.

    Raises:
        FileNotFoundError: If the folder or a batch file is missing.
    """
    if split not in CIFAR10_FILES:
        raise ConfigError(f"split must be one of {list(CIFAR10_FILES)}. Got {split!r}")
    folder = _resolve_folder(path, CIFAR10_FOLDER, CIFAR10_FILES[split][0])
    files = [folder / name for name in CIFAR10_FILES[split]]
    missing = [str(file) for file in files if not file.exists()]
    if missing:
        raise FileNotFoundError(f"Missing CIFAR-10 file(s): {', '.join(missing)}")

    parsed = [read_cifar10_records(file) for file in files]
    pixels = np.concatenate([p for p, _ in parsed])
    labels = np.concatenate([lab for _, lab in parsed])
    return DatasetSource(
        f"cifar10-{split}",
        pixels,
        labels,
        normalization=normalization,
        num_classes=NUM_CLASSES,
        seed=seed,
    )


def write_cifar10(file: str | Path, pixels: np.ndarray, labels: np.ndarray) -> None:
    """Write images and labels as CIFAR-10 records.

    Args:
        file: Output file.
        pixels: uint8 array [N, 3, 32, 32], or floats in [0, 1] (rounded to uint8).
        labels: Class indices 0-9.
    """
    pixels = _to_uint8(pixels, CIFAR10_SHAPE)
    labels = np.asarray(labels)
    if labels.shape != (len(pixels),) or labels.min() < 0 or labels.max() >= NUM_CLASSES:
        raise CorruptRecordError("labels must be one index in 0-9 per image.")
    records = np.empty((len(pixels), CIFAR10_RECORD_BYTES), dtype=np.uint8)
    records[:, 0] = labels
    records[:, 1:] = pixels.reshape(len(pixels), -1)
    atomic_write_bytes(file, records.tobytes())


def load_stl10(
    path: str | Path,
    split: str = "unlabeled",
    normalization: Normalization | None = None,
    seed: int = 0,
) -> DatasetSource:
    """Load the unlabeled (100000), train (5000) or test (8000) split of STL-10.

    Raises:
        FileNotFoundError: If the folder or a split file is missing.
        DatasetFormatError: If the image file size is not a multiple of one image,
            or the label file does not have one byte per image.
        CorruptRecordError: If a label byte is outside 1-10.
    """
    if split not in STL10_SPLITS:
        raise ConfigError(f"split must be one of {list(STL10_SPLITS)}. Got {split!r}")
    folder = _resolve_folder(path, STL10_FOLDER, f"{split}_X.bin")
    image_file = folder / f"{split}_X.bin"
    if not image_file.exists():
        raise FileNotFoundError(f"Missing STL-10 file: {image_file}")

    raw = np.fromfile(image_file, dtype=np.uint8)
    if not raw.size or raw.size % STL10_IMAGE_BYTES:
        raise DatasetFormatError(
            f"{image_file}: size {raw.size} bytes is not a positive multiple of "
            f"{STL10_IMAGE_BYTES}"
        )
    # planes are stored column-major
    pixels = raw.reshape(-1, 3, 96, 96).transpose(0, 1, 3, 2)
    pixels = np.ascontiguousarray(pixels)

    labels = None
    if split != "unlabeled":
        label_file = folder / f"{split}_y.bin"
        if not label_file.exists():
            raise FileNotFoundError(f"Missing STL-10 file: {label_file}")
        labels = np.fromfile(label_file, dtype=np.uint8).astype(np.int64)
        if len(labels) != len(pixels):
            raise DatasetFormatError(
                f"{label_file}: {len(labels)} labels for {len(pixels)} images"
            )
        bad = np.flatnonzero((labels < 1) | (labels > NUM_CLASSES))
        if len(bad):
            raise CorruptRecordError(
                f"{label_file}: record {bad[0]} has label byte {labels[bad[0]]} "
                "(expected 1-10)"
            )
        labels = labels - 1

    return DatasetSource(
        f"stl10-{split}",
        pixels,
        labels,
        normalization=normalization,
        num_classes=NUM_CLASSES if labels is not None else None,
        seed=seed,
    )


def write_stl10(
    folder: str | Path,
    split: str,
    pixels: np.ndarray,
    labels: np.ndarray | None = None,
) -> None:
    """Write images (and labels 0-9, stored as 1-10) in the STL-10 layout."""
    if split not in STL10_SPLITS:
        raise ConfigError(f"split must be one of {list(STL10_SPLITS)}. Got {split!r}")
    folder = Path(folder)
    pixels = _to_uint8(pixels, STL10_SHAPE)
    atomic_write_bytes(
        folder / f"{split}_X.bin", pixels.transpose(0, 1, 3, 2).tobytes()
    )
    if labels is None:
        return
    labels = np.asarray(labels)
    if labels.shape != (len(pixels),) or labels.min() < 0 or labels.max() >= NUM_CLASSES:
        raise CorruptRecordError("labels must be one index in 0-9 per image.")
    atomic_write_bytes(folder / f"{split}_y.bin", (labels + 1).astype(np.uint8).tobytes())


def _to_uint8(pixels: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    pixels = np.asarray(pixels)
    if pixels.ndim != 4 or pixels.shape[1:] != shape:
        raise DatasetFormatError(f"Expected images of shape [N, *{shape}]. Got {pixels.shape}")
    if pixels.dtype == np.uint8:
        return pixels
    return np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
