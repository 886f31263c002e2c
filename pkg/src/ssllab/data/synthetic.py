"""Procedurally generated datasets for desk-scale experiments."""
import numpy as np

from ..exceptions import ConfigError
from ..tensor.creation import make_rng
from .source import DatasetSource


SHAPE_NAMES = ("hbar", "vbar", "disk", "cross", "ring", "triangle")

NOISE_LEVEL = 0.15


def synth_gaussian(
    num: int, shape: tuple[int, int, int] = (3, 32, 32), seed: int = 0
) -> DatasetSource:
    """Unlabeled source of i.i.d. standard normal images.

    The images are unbounded, so augmentation never clips them.

    Examples
    --------
    >>> source = sl.synth_gaussian(100, (3, 16, 16), seed=1)
    >>> source.num_items, source.item_shape
    (100, (3, 16, 16))
    """
    if num < 1:
        raise ConfigError(f"num must be >= 1. Got {num}")
    pixels = make_rng(seed).standard_normal((num, *shape), dtype=np.float32)
    return DatasetSource(
        "synth-gaussian", pixels, None, value_range=None, seed=seed
    )


def _shape_mask(
    kind: int, yy: np.ndarray, xx: np.ndarray, cy: float, cx: float, r: float, width: float
) -> np.ndarray:
    dy, dx = yy - cy, xx - cx
    hbar = (np.abs(dy) < width) & (np.abs(dx) < r)
    vbar = (np.abs(dx) < width) & (np.abs(dy) < r)
    if kind == 0:
        return hbar
    if kind == 1:
        return vbar
    dist = np.sqrt(dy**2 + dx**2)
    if kind == 2:
        return dist < r
    if kind == 3:
        return hbar | vbar
    if kind == 4:
        return (dist < r) & (dist > max(r - 2 * width, r * 0.5))
    # triangle with the apex up
    return (dy > -r) & (dy < r) & (np.abs(dx) < (dy + r) / 2)


def _render(
    kinds: list[int],
    shape: tuple[int, int, int],
    rng: np.random.Generator,
    tint: int | None = None,
) -> np.ndarray:
    channels, height, width = shape
    yy, xx = np.meshgrid(
        (np.arange(height) + 0.5) / height, (np.arange(width) + 0.5) / width, indexing="ij"
    )
    image = rng.uniform(0.0, NOISE_LEVEL, size=shape)
    line_width = max(0.06, 1.0 / min(height, width))
    for kind in kinds:
        cy, cx = rng.uniform(0.3, 0.7, size=2)
        r = rng.uniform(0.15, 0.28)
        mask = _shape_mask(kind, yy, xx, cy, cx, r, line_width)
        color = rng.uniform(0.5, 1.0, size=channels)
        if tint is not None:
            color[tint % channels] = 1.0
            color[(tint + 1) % channels] *= 0.3
        image = np.where(mask, color[:, None, None], image)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def synth_shapes(
    num: int,
    shape: tuple[int, int, int] = (3, 32, 32),
    classes: int = 4,
    multilabel: bool = False,
    seed: int = 0,
) -> DatasetSource:
    """Images of bars, disks, crosses, rings and triangles at random positions.

    In single-label mode, class c draws primitive c % 6 tinted by c // 6, and each
    class gets exactly num // k images (the first num % k classes get one more).
    In multi-label mode each of the 'classes' primitives is present with
    probability 0.5, independently.

    Args:
        num: Number of images.
        shape: (C, H, W) of each image.
        classes: Number of classes k (2-18), or attributes m (2-6) if multilabel.
        multilabel: Return [num, m] attribute bits instead of class indices.
        seed: Seed of the images, labels and shuffle order.

    Examples
    --------
    >>> source = sl.synth_shapes(200, (3, 16, 16), classes=2, seed=0)
    >>> np.bincount(source.labels).tolist()
    [100, 100]
    """
    if num < 1:
        raise ConfigError(f"num must be >= 1. Got {num}")
    max_classes = len(SHAPE_NAMES) if multilabel else 3 * len(SHAPE_NAMES)
    if not 2 <= classes <= max_classes:
        raise ConfigError(
            f"classes must be between 2 and {max_classes}. Got {classes}"
        )
    if not multilabel and classes > len(SHAPE_NAMES) and shape[0] < 3:
        raise ConfigError("More than 6 classes are told apart by color, which needs 3 channels.")
    rng = make_rng(seed, 0)

    if multilabel:
        labels = (rng.random((num, classes)) < 0.5).astype(np.int64)
        kind_lists = [list(np.flatnonzero(row)) for row in labels]
        tints = [None] * num
    else:
        labels = rng.permutation(np.arange(num) % classes).astype(np.int64)
        kind_lists = [[c % len(SHAPE_NAMES)] for c in labels]
        tints = [c // len(SHAPE_NAMES) if classes > len(SHAPE_NAMES) else None for c in labels]

    pixels = np.stack(
        [
            _render(kinds, shape, make_rng(seed, 1, i), tint)
            for i, (kinds, tint) in enumerate(zip(kind_lists, tints))
        ]
    )
    name = f"synth-shapes-{'m' if multilabel else 'k'}{classes}"
    return DatasetSource(name, pixels, labels, num_classes=classes, seed=seed)
