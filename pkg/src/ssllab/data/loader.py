"""Batches of normalized views and labeled images, ready for the models."""
import numpy as np

from ..parallel.parallel import Parallel
from ..tensor.creation import make_rng
from .augment import AugmentationPolicy, augment, make_views
from .source import DatasetSource


def view_batch(
    source: DatasetSource,
    indices: np.ndarray,
    policy: AugmentationPolicy,
    epoch: int = 0,
    parallel: Parallel | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Two normalized views of each image in 'indices'.

    The views are computed per image with 'parallel' (in input order), so the
    batch is the same for any number of workers.

    Returns:
        Two float32 arrays of shape [len(indices), C, H, W].
    """
    parallel = parallel or Parallel(1)
    raw = source.raw(indices)
    views = parallel.starmap(
        make_views,
        [(image, policy, int(index)) for image, index in zip(raw, indices)],
        kwargs={"epoch": epoch, "value_range": source.value_range},
    )
    x1 = source.normalization.apply(np.stack([v1 for v1, _ in views]))
    x2 = source.normalization.apply(np.stack([v2 for _, v2 in views]))
    return x1, x2


def _single_view(
    image: np.ndarray,
    index: int,
    policy: AugmentationPolicy,
    epoch: int,
    value_range: tuple[float, float] | None,
) -> np.ndarray:
    return augment(image, policy, make_rng(policy.seed, epoch, index, 0), value_range)


def labeled_batch(
    source: DatasetSource,
    indices: np.ndarray,
    policy: AugmentationPolicy | None = None,
    epoch: int = 0,
    parallel: Parallel | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized images and their labels, augmented with one view if 'policy' is given."""
    labels = source.labels[indices]
    if policy is None:
        return source.get(indices), labels
    parallel = parallel or Parallel(1)
    raw = source.raw(indices)
    images = parallel.starmap(
        _single_view,
        [(image, int(index)) for image, index in zip(raw, indices)],
        kwargs={"policy": policy, "epoch": epoch, "value_range": source.value_range},
    )
    return source.normalization.apply(np.stack(images)), labels
