"""Finite-difference gradient checking."""
from collections.abc import Callable

import numpy as np

from .tensor import Tensor, no_grad


def numerical_grad(f: Callable[[Tensor], Tensor], x: Tensor, eps: float) -> np.ndarray:
    """Central differences (f(x + eps e_i) - f(x - eps e_i)) / 2 eps for every i.

    'x.data' is perturbed in place and restored, so 'x' may be a parameter that
    'f' reads through a model.
    """
    grad = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    flat_grad = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = float(f(x).data)
            flat[i] = original - eps
            minus = float(f(x).data)
            flat[i] = original
            flat_grad[i] = (plus - minus) / (2 * eps)
    return grad


def autodiff_grad(f: Callable[[Tensor], Tensor], x: Tensor) -> np.ndarray:
    previous = x.grad
    was_required = x.requires_grad
    x.grad = None
    x.requires_grad = True
    try:
        out = f(x)
        out.backward()
        grad = x.grad if x.grad is not None else np.zeros_like(x.data)
    finally:
        x.grad = previous
        x.requires_grad = was_required
    return grad


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(|a|, |n|, 1e-8), elementwise."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def grad_check(
    f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5
) -> float:
    """Max relative error between the autodiff and the finite-difference gradient.

    Use float64 tensors. The error of element i is |a - n| / max(|a|, |n|, 1e-8).

    Args:
        f: Function from 'x' to a scalar tensor. For parameters, 'f' can ignore its
            argument and read the parameter through the model.
        x: The tensor to differentiate with respect to.
        eps: Step of the central differences.

    Returns:
        The largest relative error over all elements of 'x'.

    Examples
    --------
    >>> x = Tensor(np.random.default_rng(0).normal(size=5), dtype=np.float64)
    >>> grad_check(lambda t: (t * t).sum(), x) < 1e-7
    True
    """
    analytic = autodiff_grad(f, x)
    numeric = numerical_grad(f, x, eps)
    return float(relative_errors(analytic, numeric).max())
