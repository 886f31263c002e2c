"""Classification losses."""
import numpy as np

from ..exceptions import LabelError, ShapeError
from ..tensor.ops import binary_cross_entropy_with_logits, log_softmax
from ..tensor.tensor import Tensor, as_tensor


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Batch mean of -log softmax(logits)[label], computed in log space.

    Args:
        logits: [N, k] scores.
        labels: [N] class indices in [0, k).

    Raises:
        LabelError: If a label is outside [0, k).

    Examples
    --------
    >>> logits = sl.Tensor(np.zeros((4, 10)))
    >>> round(float(sl.cross_entropy(logits, np.array([0, 3, 5, 9])).data), 6)
    2.302585
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(
            f"Expected logits [N, k] and labels [N]. Got {logits.shape} and {labels.shape}"
        )
    k = logits.shape[1]
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0 or labels.max() >= k:
        raise LabelError(f"Labels must be integers in [0, {k}).")
    one_hot = np.eye(k, dtype=logits.dtype)[labels]
    return -(log_softmax(logits, axis=1) * one_hot).sum(axis=1).mean()


def binary_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean over all N x m entries of the stable logistic loss.

    Raises:
        LabelError: If a target is not 0 or 1.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets)
    if targets.shape != logits.shape:
        raise ShapeError(f"targets {targets.shape} do not match logits {logits.shape}")
    if not np.isin(targets, (0, 1)).all():
        raise LabelError("Targets must be 0 or 1.")
    return binary_cross_entropy_with_logits(logits, targets)
