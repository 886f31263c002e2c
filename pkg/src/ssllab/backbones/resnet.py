"""Residual CNN for small images.

Same layout as ResNet-18, but with a 3x3 stride-1 stem and no max pool, so 32x32
inputs are not downsampled before the first stage.
"""
import numpy as np

from ..nn.layers import BatchNorm, Conv2d, Pool2d
from ..nn.module import Module, Sequential
from ..tensor.tensor import Tensor
from .config import BackboneConfig


STAGE_WIDTHS = (1, 2, 4, 8)


class BasicBlock(Module):
    """Two 3x3 convs with batch norm, plus a skip connection.

    The skip connection is the identity, or a strided 1x1 conv with batch norm when
    the block changes the resolution or the number of channels.
    """

    def __init__(
        self, in_channels: int, out_channels: int, stride: int, rng: np.random.Generator
    ) -> None:
        super().__init__()
        self.conv1 = Conv2d(in_channels, out_channels, 3, stride, padding=1, rng=rng)
        self.bn1 = BatchNorm(out_channels)
        self.conv2 = Conv2d(out_channels, out_channels, 3, 1, padding=1, rng=rng)
        self.bn2 = BatchNorm(out_channels)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = Sequential(
                Conv2d(in_channels, out_channels, 1, stride, rng=rng),
                BatchNorm(out_channels),
            )
        else:
            self.shortcut = None

    def forward(self, x: Tensor) -> Tensor:
        out = self.bn1(self.conv1(x)).relu()
        out = self.bn2(self.conv2(out))
        identity = x if self.shortcut is None else self.shortcut(x)
        return (out + identity).relu()


class ResNetSmall(Module):
    def __init__(self, config: BackboneConfig, rng: np.random.Generator) -> None:
        super().__init__()
        self.config = config
        channels, _, _ = config.input_size
        width = config.base_width

        self.stem = Sequential(
            Conv2d(channels, width, 3, stride=1, padding=1, rng=rng),
            BatchNorm(width),
        )

        blocks = []
        in_channels = width
        for stage, factor in enumerate(STAGE_WIDTHS):
            out_channels = width * factor
            for i in range(config.depth):
                stride = 2 if stage > 0 and i == 0 else 1
                blocks.append(BasicBlock(in_channels, out_channels, stride, rng))
                in_channels = out_channels
        self.blocks = Sequential(*blocks)
        self.pool = Pool2d("global_avg")
        self.output_dim = in_channels

    def forward(self, x: Tensor) -> Tensor:
        out = self.stem(x).relu()
        out = self.blocks(out)
        return self.pool(out)
