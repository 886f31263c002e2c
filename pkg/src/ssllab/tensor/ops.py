"""Differentiable operations used by the layers: activations, softmax, conv, pooling."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ShapeError
from .tensor import Tensor, as_tensor, broadcast_shape


# tanh approximation of gelu:
# gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
GELU_C = float(np.sqrt(2.0 / np.pi))
GELU_A = 0.044715


def relu(x: Tensor) -> Tensor:
    return as_tensor(x).relu()


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    x = as_tensor(x)
    a = x.data
    inner = GELU_C * (a + GELU_A * a**3)
    t = np.tanh(inner)
    out = 0.5 * a * (1 + t)

    def backward(g):
        d_inner = GELU_C * (1 + 3 * GELU_A * a**2)
        return (g * (0.5 * (1 + t) + 0.5 * a * (1 - t * t) * d_inner),)

    return Tensor.from_op(out, (x,), backward, "gelu")


def scale(x: Tensor, factor: float) -> Tensor:
    return as_tensor(x) * float(factor)


_ELEMENTWISE = {
    "add": lambda a, b: a + b,
    "mul": lambda a, b: a * b,
    "relu": relu,
    "gelu": gelu,
    "neg": lambda a: -a,
    "scale": scale,
}


def elementwise(op: str, *operands) -> Tensor:
    """Apply one of add, mul, relu, gelu, neg or scale.

    Examples
    --------
    >>> elementwise("relu", Tensor([-1.0, 0.0, 2.0])).data
    array([0., 0., 2.], dtype=float32)
    >>> elementwise("scale", Tensor([1.0, 2.0]), 3).data
    array([3., 6.], dtype=float32)
    """
    try:
        func = _ELEMENTWISE[op]
    except KeyError as e:
        raise ValueError(
            f"Unknown op {op!r}. Choose from {', '.join(_ELEMENTWISE)}"
        ) from e
    if op in ("add", "mul"):
        a, b = (as_tensor(x) for x in operands)
        broadcast_shape(a.shape, b.shape)
        return func(a, b)
    if op == "scale":
        return func(as_tensor(operands[0]), operands[1])
    return func(as_tensor(operands[0]))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax with max-subtraction, so large logits do not overflow."""
    x = as_tensor(x)
    if x.shape[axis] < 1:
        raise ShapeError("softmax needs at least one element along the axis.")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return Tensor.from_op(out, (x,), backward, "log_softmax")


def _pad_spatial(a: np.ndarray, padding: int, value: float = 0.0) -> np.ndarray:
    if not padding:
        return a
    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    return np.pad(a, pad, mode="constant", constant_values=value)


def _output_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def _windows(a: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """View of shape [N, C, H', W', kh, kw]."""
    return sliding_window_view(a, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """2D cross-correlation with zero padding.

    Args:
        x: Input of shape [N, C, H, W].
        weight: Filters of shape [F, C, kh, kw].
        bias: Optional [F].
        stride: Positive stride, same along both axes.
        padding: Zero padding added on all four sides.

    Returns:
        Tensor of shape [N, F, H', W'] with H' = (H + 2p - kh) // stride + 1.

    Raises:
        ShapeError: If ranks or channels do not match, or the kernel is larger
            than the padded input.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(
            f"conv2d needs [N,C,H,W] input and [F,C,kh,kw] weight. "
            f"Got {x.shape} and {weight.shape}"
        )
    n, c, h, w = x.shape
    f, wc, kh, kw = weight.shape
    if wc != c:
        raise ShapeError(f"Input has {c} channels, weight expects {wc}")
    if stride < 1 or padding < 0:
        raise ShapeError("stride must be >= 1 and padding >= 0")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise ShapeError(
            f"Kernel {kh}x{kw} is larger than the padded input "
            f"{h + 2 * padding}x{w + 2 * padding}"
        )

    padded = _pad_spatial(x.data, padding)
    cols = _windows(padded, kh, kw, stride)
    out_h, out_w = cols.shape[2], cols.shape[3]
    w_data = weight.data
    out = np.tensordot(cols, w_data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, f, 1, 1)
    out = np.ascontiguousarray(out)

    def backward(g):
        grad_w = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        grad_padded = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                grad_padded[
                    :,
                    :,
                    i : i + stride * out_h : stride,
                    j : j + stride * out_w : stride,
                ] += np.tensordot(w_data[:, :, i, j], g, axes=([0], [1])).transpose(
                    1, 0, 2, 3
                )
        grad_x = grad_padded[:, :, padding : padding + h, padding : padding + w]
        grads = [grad_x, grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, inputs, backward, "conv2d")


def _check_pool(x: Tensor, k: int, stride: int, padding: int) -> None:
    if x.ndim != 4:
        raise ShapeError(f"Pooling needs [N,C,H,W] input. Got {x.shape}")
    h, w = x.shape[2:]
    if k > h + 2 * padding or k > w + 2 * padding:
        raise ShapeError(
            f"Pooling kernel {k} exceeds the padded input {h + 2 * padding}x"
            f"{w + 2 * padding}"
        )
    if k < 1 or stride < 1:
        raise ShapeError("Pooling kernel and stride must be >= 1")


def max_pool2d(x: Tensor, k: int, stride: int | None = None, padding: int = 0) -> Tensor:
    """Max pooling. Gradient goes to the first maximum of each window."""
    x = as_tensor(x)
    stride = stride or k
    _check_pool(x, k, stride, padding)
    n, c, h, w = x.shape
    padded = _pad_spatial(x.data, padding, value=-np.inf)
    cols = _windows(padded, k, k, stride)
    out_h, out_w = cols.shape[2], cols.shape[3]
    flat = cols.reshape(n, c, out_h, out_w, k * k)
    argmax = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]

    def backward(g):
        grad_padded = np.zeros(padded.shape, dtype=g.dtype)
        for pos in range(k * k):
            i, j = divmod(pos, k)
            grad_padded[
                :, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride
            ] += g * (argmax == pos)
        return (grad_padded[:, :, padding : padding + h, padding : padding + w],)

    return Tensor.from_op(np.ascontiguousarray(out), (x,), backward, "max_pool2d")


def avg_pool2d(x: Tensor, k: int, stride: int | None = None, padding: int = 0) -> Tensor:
    """Average pooling. Zero padding counts towards the average."""
    x = as_tensor(x)
    stride = stride or k
    _check_pool(x, k, stride, padding)
    h, w = x.shape[2:]
    padded = _pad_spatial(x.data, padding)
    cols = _windows(padded, k, k, stride)
    out_h, out_w = cols.shape[2], cols.shape[3]
    out = cols.mean(axis=(4, 5))

    def backward(g):
        grad_padded = np.zeros(padded.shape, dtype=g.dtype)
        share = g / (k * k)
        for i in range(k):
            for j in range(k):
                grad_padded[
                    :,
                    :,
                    i : i + stride * out_h : stride,
                    j : j + stride * out_w : stride,
                ] += share
        return (grad_padded[:, :, padding : padding + h, padding : padding + w],)

    return Tensor.from_op(np.ascontiguousarray(out), (x,), backward, "avg_pool2d")


def global_avg_pool2d(x: Tensor) -> Tensor:
    """[N, C, H, W] -> [N, C]"""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"Pooling needs [N,C,H,W] input. Got {x.shape}")
    return x.mean(axis=(2, 3))


def pool2d(x: Tensor, kind: str, k: int | None = None, stride: int | None = None):
    """Dispatch to max, avg or global_avg pooling."""
    if kind == "global_avg":
        return global_avg_pool2d(x)
    if k is None:
        raise ValueError(f"'k' is required for {kind} pooling")
    if kind == "max":
        return max_pool2d(x, k, stride)
    if kind == "avg":
        return avg_pool2d(x, k, stride)
    raise ValueError(f"kind must be 'max', 'avg' or 'global_avg'. Got {kind!r}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function in the tanh form, which does not overflow."""
    return 0.5 * (1 + np.tanh(0.5 * np.asarray(x)))


def binary_cross_entropy_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean of max(x, 0) - x y + log(1 + exp(-|x|)), which never overflows."""
    logits = as_tensor(logits)
    x = logits.data
    y = np.asarray(targets, dtype=x.dtype)
    loss = np.maximum(x, 0) - x * y + np.log1p(np.exp(-np.abs(x)))
    count = loss.size

    def backward(g):
        return (g * (sigmoid(x) - y) / count,)

    return Tensor.from_op(np.asarray(loss.mean()), (logits,), backward, "bce_logits")
