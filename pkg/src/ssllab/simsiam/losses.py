"""Negative cosine similarity, the symmetric loss and the collapse monitor."""
import numpy as np

from ..exceptions import DegenerateBatchError, DegenerateVectorError, ShapeError
from ..tensor.tensor import Tensor, as_tensor


MIN_NORM = 1e-12


def _check_pair(x: Tensor, y: Tensor) -> None:
    if x.ndim != 2 or x.shape != y.shape:
        raise ShapeError(f"Expected two [N, d] tensors. Got {x.shape} and {y.shape}")


def _check_norms(norms: np.ndarray) -> None:
    small = norms < MIN_NORM
    if small.any():
        raise DegenerateVectorError(int(small.sum()), float(norms.min()))


def l2_normalize(x: Tensor) -> Tensor:
    """Rows divided by their l2 norm.

    Raises:
        DegenerateVectorError: If a row has norm below 1e-12.
    """
    x = as_tensor(x)
    norm = (x * x).sum(axis=1, keepdims=True).sqrt()
    _check_norms(norm.data)
    return x / norm


def negative_cosine_similarity(x: Tensor, y: Tensor) -> Tensor:
    """Batch mean of -<x / |x|, y / |y|>. Always in [-1, 1].

    Examples
    --------
    >>> float(negative_cosine_similarity(Tensor([[3.0, 4.0]]), Tensor([[4.0, 3.0]])).data)
    -0.96...
    """
    x, y = as_tensor(x), as_tensor(y)
    _check_pair(x, y)
    return -(l2_normalize(x) * l2_normalize(y)).sum(axis=1).mean()


def symmetric_loss(p1: Tensor, p2: Tensor, z1: Tensor, z2: Tensor) -> Tensor:
    """0.5 D(p1, z2) + 0.5 D(p2, z1).

    Swapping the views, symmetric_loss(p2, p1, z2, z1), gives the bitwise identical
    value, since it only changes the order of the two terms of the sum.
    """
    return 0.5 * negative_cosine_similarity(p1, z2) + 0.5 * negative_cosine_similarity(
        p2, z1
    )


def representation_std(z: Tensor | np.ndarray) -> float:
    """Mean over dimensions of the std of the l2-normalized rows.

    About 1/sqrt(d) when the rows are spread over the sphere, and 0 when they have
    collapsed to a single direction.

    Raises:
        DegenerateBatchError: With fewer than two rows.
    """
    data = z.data if isinstance(z, Tensor) else np.asarray(z)
    if data.ndim != 2 or data.shape[0] < 2:
        raise DegenerateBatchError(
            f"representation_std needs at least two rows. Got shape {data.shape}"
        )
    data = data.astype(np.float64)
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    _check_norms(norms)
    return float((data / norms).std(axis=0).mean())
