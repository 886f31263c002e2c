"""Projection and prediction heads of the siamese model."""
import numpy as np

from ..exceptions import ConfigError
from ..nn.layers import BatchNorm, Linear, ReLU
from ..nn.module import Module, Sequential
from ..tensor.tensor import Tensor


# hidden width of the prediction head is dim // BOTTLENECK_FACTOR
BOTTLENECK_FACTOR = 4


class ProjectionHead(Module):
    """Three linear layers d_in -> d -> d -> d.

    Batch norm and relu follow the first two layers; the output layer has neither,
    unless 'output_bn' is set (the variant of the original simple siamese method,
    which adds batch norm without relu after the output layer).
    """

    def __init__(
        self,
        in_dim: int,
        dim: int,
        rng: np.random.Generator,
        output_bn: bool = False,
    ) -> None:
        super().__init__()
        self.in_dim = in_dim
        self.dim = dim
        self.output_bn = output_bn
        layers = [
            Linear(in_dim, dim, bias=False, rng=rng),
            BatchNorm(dim),
            ReLU(),
            Linear(dim, dim, bias=False, rng=rng),
            BatchNorm(dim),
            ReLU(),
            Linear(dim, dim, bias=not output_bn, rng=rng),
        ]
        if output_bn:
            layers.append(BatchNorm(dim))
        self.layers = Sequential(*layers)

    def linear_layers(self) -> list[Linear]:
        return [layer for layer in self.layers if isinstance(layer, Linear)]

    def forward(self, x: Tensor) -> Tensor:
        return self.layers(x)


class PredictionHead(Module):
    """Bottleneck MLP d -> d/4 -> d with batch norm and relu after the hidden layer.

    Raises:
        ConfigError: If 'dim' is not divisible by 4.
    """

    def __init__(self, dim: int, rng: np.random.Generator) -> None:
        super().__init__()
        if dim < BOTTLENECK_FACTOR or dim % BOTTLENECK_FACTOR:
            raise ConfigError(
                f"Projection dim must be divisible by {BOTTLENECK_FACTOR}. Got {dim}"
            )
        self.dim = dim
        self.hidden_dim = dim // BOTTLENECK_FACTOR
        self.layers = Sequential(
            Linear(dim, self.hidden_dim, bias=False, rng=rng),
            BatchNorm(self.hidden_dim),
            ReLU(),
            Linear(self.hidden_dim, dim, rng=rng),
        )

    def forward(self, x: Tensor) -> Tensor:
        return self.layers(x)
