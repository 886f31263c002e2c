"""Trainable layers: linear, conv, batch norm, layer norm, attention and pooling.

Each layer has a module-level forward function that does the math given the layer
(its parameters and state), and a Module class that holds the parameters.
"""
import numpy as np

from ..exceptions import ConfigError, DegenerateBatchError, ShapeError
from ..tensor.creation import make_rng
from ..tensor.ops import (
    avg_pool2d,
    conv2d,
    gelu,
    global_avg_pool2d,
    max_pool2d,
    softmax,
)
from ..tensor.tensor import Tensor, as_tensor
from .init import kaiming_uniform, trunc_normal
from .module import Module, Parameter


def linear_forward(x: Tensor, layer: "Linear") -> Tensor:
    """x W + b over the last axis.

    Raises:
        ShapeError: If the last axis of 'x' is not the layer's input size.
    """
    x = as_tensor(x)
    if x.shape[-1] != layer.in_features:
        raise ShapeError(
            f"Linear layer expects {layer.in_features} input features. "
            f"Got shape {x.shape}"
        )
    out = x @ layer.weight
    if layer.bias is not None:
        out = out + layer.bias
    return out


class Linear(Module):
    """Fully-connected layer. The weight has shape [in_features, out_features].

    Args:
        in_features: Input size.
        out_features: Output size.
        bias: Whether to add a bias. Layers followed by batch norm go without.
        rng: Generator for the initial weights.
        init: "kaiming" (for layers before relu) or "trunc_normal" (transformers).
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        bias: bool = True,
        rng: np.random.Generator | None = None,
        init: str = "kaiming",
    ) -> None:
        super().__init__()
        rng = rng or make_rng(0)
        self.in_features = in_features
        self.out_features = out_features
        shape = (in_features, out_features)
        if init == "kaiming":
            weight = kaiming_uniform(rng, shape, fan_in=in_features)
        elif init == "trunc_normal":
            weight = trunc_normal(rng, shape)
        else:
            raise ConfigError(f"Unknown init {init!r}")
        self.weight = Parameter(weight)
        self.bias = Parameter(np.zeros(out_features, np.float32)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return linear_forward(x, self)

    def extra_repr(self) -> str:
        return (
            f"{self.in_features}, {self.out_features}, bias={self.bias is not None}"
        )


class Conv2d(Module):
    """2D convolution with kaiming-uniform weights of shape [F, C, k, k]."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        bias: bool = False,
        rng: np.random.Generator | None = None,
    ) -> None:
        super().__init__()
        rng = rng or make_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Parameter(
            kaiming_uniform(
                rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in
            )
        )
        self.bias = Parameter(np.zeros(out_channels, np.float32)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def extra_repr(self) -> str:
        return (
            f"{self.in_channels}, {self.out_channels}, kernel_size={self.kernel_size}, "
            f"stride={self.stride}, padding={self.padding}"
        )


def batchnorm_forward(x: Tensor, bn: "BatchNorm") -> Tensor:
    """Normalize per channel (axis 1), then scale by gamma and shift by beta.

    In train mode the batch statistics are used and the running statistics are
    updated with 'momentum' (running_var with the unbiased batch variance). In eval
    mode only the running statistics are used, so the output is a pure function of
    the input.

    Raises:
        DegenerateBatchError: In train mode, if the batch holds fewer than two
            samples.
        ShapeError: If axis 1 is not the layer's number of features.
    """
    x = as_tensor(x)
    if x.ndim < 2 or x.shape[1] != bn.num_features:
        raise ShapeError(
            f"BatchNorm expects {bn.num_features} channels on axis 1. Got {x.shape}"
        )
    axes = (0, *range(2, x.ndim))
    stat_shape = [1] * x.ndim
    stat_shape[1] = bn.num_features
    gamma = bn.gamma.reshape(stat_shape)
    beta = bn.beta.reshape(stat_shape)

    if not bn.training:
        mean = bn.running_mean.reshape(stat_shape)
        std = np.sqrt(bn.running_var + bn.eps).reshape(stat_shape)
        mean, std = Tensor(mean.astype(x.dtype)), Tensor(std.astype(x.dtype))
        return (x - mean) / std * gamma + beta

    if x.shape[0] < 2:
        raise DegenerateBatchError(
            "BatchNorm in train mode needs a batch of at least two samples. "
            f"Got input of shape {x.shape}"
        )
    mean = x.mean(axis=axes, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=axes, keepdims=True)
    out = centered / (var + bn.eps).sqrt() * gamma + beta

    count = x.size // bn.num_features
    batch_mean = mean.data.reshape(-1)
    batch_var = var.data.reshape(-1) * count / (count - 1)
    m = bn.momentum
    bn.running_mean = (1 - m) * bn.running_mean + m * batch_mean
    bn.running_var = (1 - m) * bn.running_var + m * batch_var
    return out


class BatchNorm(Module):
    """Batch normalization over axis 1, for [N, C] and [N, C, H, W] inputs.

    Args:
        num_features: Number of channels.
        momentum: Weight of the newest batch in the running statistics.
        eps: Added to the variance before the square root.
    """

    def __init__(
        self, num_features: int, momentum: float = 0.1, eps: float = 1e-5
    ) -> None:
        super().__init__()
        if not 0 < momentum < 1:
            raise ConfigError(f"momentum must be in (0, 1). Got {momentum}")
        if eps <= 0:
            raise ConfigError(f"eps must be positive. Got {eps}")
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(num_features, np.float32))
        self.beta = Parameter(np.zeros(num_features, np.float32))
        self.register_buffer("running_mean", np.zeros(num_features, np.float32))
        self.register_buffer("running_var", np.ones(num_features, np.float32))

    @property
    def running_mean(self) -> np.ndarray:
        return self._buffers["running_mean"]

    @running_mean.setter
    def running_mean(self, value: np.ndarray) -> None:
        dtype = self._buffers["running_mean"].dtype
        self._buffers["running_mean"] = value.astype(dtype)

    @property
    def running_var(self) -> np.ndarray:
        return self._buffers["running_var"]

    @running_var.setter
    def running_var(self, value: np.ndarray) -> None:
        dtype = self._buffers["running_var"].dtype
        self._buffers["running_var"] = value.astype(dtype)

    @property
    def mode(self) -> str:
        return "train" if self.training else "eval"

    def forward(self, x: Tensor) -> Tensor:
        return batchnorm_forward(x, self)

    def extra_repr(self) -> str:
        return f"{self.num_features}, momentum={self.momentum}, eps={self.eps}"


def layernorm_forward(x: Tensor, ln: "LayerNorm") -> Tensor:
    """Normalize over the last axis of every position, then apply the affine."""
    x = as_tensor(x)
    if x.shape[-1] != ln.dim:
        raise ShapeError(f"LayerNorm expects last axis {ln.dim}. Got {x.shape}")
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / (var + ln.eps).sqrt() * ln.gamma + ln.beta


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5) -> None:
        super().__init__()
        self.dim = dim
        self.eps = eps
        self.gamma = Parameter(np.ones(dim, np.float32))
        self.beta = Parameter(np.zeros(dim, np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return layernorm_forward(x, self)

    def extra_repr(self) -> str:
        return f"{self.dim}, eps={self.eps}"


def multihead_attention(x: Tensor, attn: "MultiheadAttention") -> Tensor:
    """softmax(Q K^T / sqrt(d / h)) V per head, heads concatenated, then projected.

    There is no positional information inside the attention itself, so permuting
    the tokens permutes the output rows the same way.
    """
    x = as_tensor(x)
    if x.ndim != 3 or x.shape[-1] != attn.dim:
        raise ShapeError(f"Attention expects [N, T, {attn.dim}]. Got {x.shape}")
    n, t, d = x.shape
    h = attn.heads
    head_dim = d // h

    def split_heads(y: Tensor) -> Tensor:
        return y.reshape(n, t, h, head_dim).transpose(0, 2, 1, 3)

    q = split_heads(attn.query(x))
    k = split_heads(attn.key(x))
    v = split_heads(attn.value(x))
    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(head_dim))
    weights = softmax(scores, axis=-1)
    out = (weights @ v).transpose(0, 2, 1, 3).reshape(n, t, d)
    return attn.proj(out)


class MultiheadAttention(Module):
    """Multi-head self attention with separate query, key, value and output layers.

    Raises:
        ConfigError: If 'dim' is not divisible by 'heads'.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator | None = None):
        super().__init__()
        if heads < 1 or dim % heads:
            raise ConfigError(f"dim ({dim}) must be divisible by heads ({heads})")
        rng = rng or make_rng(0)
        self.dim = dim
        self.heads = heads
        self.query = Linear(dim, dim, rng=rng, init="trunc_normal")
        self.key = Linear(dim, dim, rng=rng, init="trunc_normal")
        self.value = Linear(dim, dim, rng=rng, init="trunc_normal")
        self.proj = Linear(dim, dim, rng=rng, init="trunc_normal")

    def forward(self, x: Tensor) -> Tensor:
        return multihead_attention(x, self)

    def extra_repr(self) -> str:
        return f"dim={self.dim}, heads={self.heads}"


class ReLU(Module):
    def forward(self, x: Tensor) -> Tensor:
        return as_tensor(x).relu()


class GELU(Module):
    def forward(self, x: Tensor) -> Tensor:
        return gelu(x)


class Pool2d(Module):
    """Max, average or global average pooling. Global average returns [N, C]."""

    def __init__(self, kind: str, k: int | None = None, stride: int | None = None):
        super().__init__()
        if kind not in ("max", "avg", "global_avg"):
            raise ConfigError(f"Unknown pooling {kind!r}")
        if kind != "global_avg" and not k:
            raise ConfigError(f"{kind} pooling needs a kernel size")
        self.kind = kind
        self.k = k
        self.stride = stride or k

    def forward(self, x: Tensor) -> Tensor:
        if self.kind == "global_avg":
            return global_avg_pool2d(x)
        if self.kind == "max":
            return max_pool2d(x, self.k, self.stride)
        return avg_pool2d(x, self.k, self.stride)

    def extra_repr(self) -> str:
        return f"{self.kind!r}, k={self.k}, stride={self.stride}"
