"""Creating tensors and seeded random generators.

All randomness in ssllab comes from numpy's Philox generator, a counter-based PRNG
(Philox4x64-10). The key is derived from the seed (and optional extra integers) with
numpy's SeedSequence, so a fixed seed gives a bit-identical stream on every platform
numpy supports.
"""
from collections.abc import Sequence

import numpy as np

from ..exceptions import InvalidShapeError, LengthError
from .tensor import Tensor


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator keyed by 'seed' and any number of extra integers.

    Extra keys give independent streams, e.g. one per (item index, view index).
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


def _validate_shape(shape) -> tuple[int, ...]:
    if isinstance(shape, int):
        shape = (shape,)
    shape = tuple(int(dim) for dim in shape)
    if not shape or any(dim < 1 for dim in shape):
        raise InvalidShapeError(shape)
    return shape


def tensor_create(
    shape: Sequence[int] | int,
    fill: str | Sequence[float] | np.ndarray = "zeros",
    *,
    mean: float = 0.0,
    std: float = 1.0,
    seed: int = 0,
    dtype=np.float32,
    requires_grad: bool = False,
) -> Tensor:
    """Create a tensor filled with zeros, ones, gaussian noise or explicit values.

    Args:
        shape: Dimension sizes, all >= 1.
        fill: "zeros", "ones", "gaussian" or the explicit values (flat or nested).
        mean: Mean of the gaussian fill.
        std: Standard deviation of the gaussian fill.
        seed: Seed of the gaussian fill. Philox, so runs reproduce bit-exactly.
        dtype: float32 (default) or float64.
        requires_grad: Whether the tensor is a leaf that collects gradients.

    Returns:
        A Tensor of the given shape.

    Raises:
        InvalidShapeError: If a dimension is < 1.
        LengthError: If the number of explicit values does not match the shape.

    Examples
    --------
    >>> tensor_create([2, 2]).data
    array([[0., 0.],
           [0., 0.]], dtype=float32)
    >>> tensor_create([3], [1, 2, 3]).data
    array([1., 2., 3.], dtype=float32)
    """
    shape = _validate_shape(shape)

    if isinstance(fill, str):
        if fill == "zeros":
            data = np.zeros(shape, dtype=dtype)
        elif fill == "ones":
            data = np.ones(shape, dtype=dtype)
        elif fill == "gaussian":
            data = make_rng(seed).normal(mean, std, size=shape).astype(dtype)
        else:
            raise ValueError(
                f"fill must be 'zeros', 'ones', 'gaussian' or values. Got {fill!r}"
            )
    else:
        values = np.asarray(fill, dtype=dtype).reshape(-1)
        if values.size != int(np.prod(shape)):
            raise LengthError(values.size, shape)
        data = values.reshape(shape)

    return Tensor(data, requires_grad=requires_grad, dtype=dtype)
