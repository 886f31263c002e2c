"""Weight initialization.

Kaiming-uniform for conv and linear layers followed by relu, truncated normal with
std 0.02 for transformer weights. Biases start at zero.
"""
import numpy as np


def kaiming_uniform(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int
) -> np.ndarray:
    """U(-b, b) with b = sqrt(6 / fan_in), the relu gain variant."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def trunc_normal(
    rng: np.random.Generator, shape: tuple[int, ...], std: float = 0.02
) -> np.ndarray:
    """Normal(0, std) redrawn until every value lies within two std."""
    values = rng.normal(0.0, std, size=shape)
    outside = np.abs(values) > 2 * std
    while outside.any():
        values[outside] = rng.normal(0.0, std, size=int(outside.sum()))
        outside = np.abs(values) > 2 * std
    return values.astype(np.float32)
