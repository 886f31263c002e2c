"""Tensor with reverse-mode automatic differentiation.

Every operation on tensors that require gradients appends a node to the autodiff
graph. Node ids come from a single increasing counter, so the append order is a
topological order: the inputs of a node always have smaller ids than the node
itself. backward walks the reachable nodes in decreasing id order.

Only float32 and float64 buffers are used. Anything else is cast to float32.
"""
import itertools
import threading
from collections.abc import Callable, Sequence
from contextlib import contextmanager

import numpy as np

from ..exceptions import GraphConsumedError, RankError, ShapeError


FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_node_ids = itertools.count()
_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Do not record any graph inside the block (thread-local).

    Examples
    --------
    >>> with no_grad():
    ...     features = backbone(images)
    """
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def _as_float_array(data, dtype=None) -> np.ndarray:
    if dtype is not None:
        dtype = np.dtype(dtype)
        if dtype not in FLOAT_DTYPES:
            raise TypeError(f"dtype must be float32 or float64. Got {dtype}")
        return np.ascontiguousarray(data, dtype=dtype)
    if isinstance(data, (np.ndarray, np.generic)) and data.dtype in FLOAT_DTYPES:
        return np.ascontiguousarray(data)
    return np.ascontiguousarray(data, dtype=np.float32)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to 'shape'."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def broadcast_shape(*shapes) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError as e:
        raise ShapeError(
            f"Shapes {', '.join(str(s) for s in shapes)} are not broadcastable."
        ) from e


class Node:
    """One entry of the autodiff graph.

    Holds the operation tag, the input tensors and the backward function, which
    closes over the activations saved during forward. The backward function maps the
    output gradient to one gradient (or None) per input.
    """

    __slots__ = ("id", "op", "inputs", "backward_fn", "consumed")

    def __init__(self, op: str, inputs: tuple["Tensor", ...], backward_fn: Callable):
        self.id = next(_node_ids)
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.consumed = False

    def release(self) -> None:
        self.backward_fn = None
        self.consumed = True

    def __repr__(self) -> str:
        return f"Node(id={self.id}, op={self.op!r}, n_inputs={len(self.inputs)})"


class Tensor:
    """N-dimensional float array that takes part in automatic differentiation.

    Args:
        data: Array-like. float32 and float64 arrays keep their dtype, everything
            else becomes float32 unless 'dtype' is given.
        requires_grad: Whether gradients should be accumulated into 'grad'.
        dtype: Optional float32 or float64.
        name: Optional name, used in error messages and parameter listings.

    Examples
    --------
    >>> w = Tensor([1.0, 2.0], requires_grad=True)
    >>> loss = (w * w).sum()
    >>> loss.backward()
    >>> w.grad
    array([2., 4.], dtype=float32)
    """

    __array_priority__ = 100

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        dtype=None,
        name: str | None = None,
    ) -> None:
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = _as_float_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._node: Node | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def node_id(self) -> int | None:
        return self._node.id if self._node is not None else None

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise RankError(f"item() needs a tensor with one element. Got {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Same data, no history. Backward treats the result as a constant."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def astype(self, dtype) -> "Tensor":
        out = Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)
        out.name = self.name
        return out

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        inputs: Sequence["Tensor"],
        backward_fn: Callable,
        op: str,
    ) -> "Tensor":
        """Create the output of an operation and register it in the graph.

        No node is recorded if none of the inputs need gradients, or inside no_grad.
        """
        out = cls(data)
        if is_grad_enabled() and any(t.requires_grad for t in inputs):
            out.requires_grad = True
            out._node = Node(op, tuple(inputs), backward_fn)
        return out

    def backward(self, grad: np.ndarray | None = None, retain_graph: bool = False):
        """Accumulate the gradient of this scalar into every requires_grad leaf.

        Gradients are added to what is already in 'grad', so calling backward on
        several losses before the optimizer step accumulates them.

        Args:
            grad: Optional output gradient. Defaults to 1.
            retain_graph: Keep the graph so backward can be called again.

        Raises:
            RankError: If the tensor is not a scalar and no 'grad' is given.
            GraphConsumedError: If the graph was released by an earlier backward.
        """
        if grad is None:
            if self.size != 1:
                raise RankError(
                    f"backward needs a scalar loss. Got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.dtype).reshape(self.shape)

        if not self.requires_grad:
            return

        if self._node is None:
            self._accumulate(grad)
            return

        nodes = self._reachable_nodes()
        grads: dict[int, np.ndarray] = {self._node.id: grad}

        for node in nodes:
            out_grad = grads.pop(node.id, None)
            if out_grad is None:
                continue
            input_grads = node.backward_fn(out_grad)
            for tensor, input_grad in zip(node.inputs, input_grads, strict=True):
                if input_grad is None or not tensor.requires_grad:
                    continue
                if tensor._node is None:
                    tensor._accumulate(input_grad)
                elif tensor._node.id in grads:
                    grads[tensor._node.id] = grads[tensor._node.id] + input_grad
                else:
                    grads[tensor._node.id] = input_grad

        if not retain_graph:
            for node in nodes:
                node.release()

    def _reachable_nodes(self) -> list[Node]:
        seen: dict[int, Node] = {}
        stack = [self._node]
        while stack:
            node = stack.pop()
            if node.id in seen:
                continue
            if node.consumed:
                raise GraphConsumedError(
                    f"The graph behind node {node.id} ({node.op}) was consumed by an "
                    "earlier backward call."
                )
            seen[node.id] = node
            for tensor in node.inputs:
                if tensor._node is not None and tensor.requires_grad:
                    stack.append(tensor._node)
        return sorted(seen.values(), key=lambda node: node.id, reverse=True)

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = unbroadcast(np.asarray(grad), self.shape).astype(self.dtype, copy=False)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    # arithmetic

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other, self.dtype)
        broadcast_shape(self.shape, other.shape)

        def backward(g):
            return unbroadcast(g, self.shape), unbroadcast(g, other.shape)

        return Tensor.from_op(self.data + other.data, (self, other), backward, "add")

    def __radd__(self, other) -> "Tensor":
        return self + other

    def __sub__(self, other) -> "Tensor":
        other = as_tensor(other, self.dtype)
        broadcast_shape(self.shape, other.shape)

        def backward(g):
            return unbroadcast(g, self.shape), unbroadcast(-g, other.shape)

        return Tensor.from_op(self.data - other.data, (self, other), backward, "sub")

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other, self.dtype) - self

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other, self.dtype)
        broadcast_shape(self.shape, other.shape)
        a, b = self.data, other.data

        def backward(g):
            return unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)

        return Tensor.from_op(a * b, (self, other), backward, "mul")

    def __rmul__(self, other) -> "Tensor":
        return self * other

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other, self.dtype)
        broadcast_shape(self.shape, other.shape)
        a, b = self.data, other.data

        def backward(g):
            return unbroadcast(g / b, a.shape), unbroadcast(-g * a / (b * b), b.shape)

        return Tensor.from_op(a / b, (self, other), backward, "div")

    def __rtruediv__(self, other) -> "Tensor":
        return as_tensor(other, self.dtype) / self

    def __neg__(self) -> "Tensor":
        return Tensor.from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise TypeError("Only scalar exponents are supported.")
        a = self.data

        def backward(g):
            return (g * exponent * a ** (exponent - 1),)

        return Tensor.from_op(a**exponent, (self,), backward, "pow")

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        shape = self.shape

        def backward(g):
            full = np.zeros(shape, dtype=g.dtype)
            np.add.at(full, index, g)
            return (full,)

        return Tensor.from_op(self.data[index], (self,), backward, "getitem")

    # elementwise functions

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor.from_op(out, (self,), lambda g: (g * out,), "exp")

    def log(self) -> "Tensor":
        a = self.data
        return Tensor.from_op(np.log(a), (self,), lambda g: (g / a,), "log")

    def sqrt(self) -> "Tensor":
        out = np.sqrt(self.data)
        return Tensor.from_op(out, (self,), lambda g: (g / (2 * out),), "sqrt")

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return Tensor.from_op(out, (self,), lambda g: (g * (1 - out * out),), "tanh")

    def relu(self) -> "Tensor":
        mask = self.data > 0
        return Tensor.from_op(
            np.where(mask, self.data, 0).astype(self.dtype),
            (self,),
            lambda g: (g * mask,),
            "relu",
        )

    # reductions

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return Tensor.from_op(
            np.asarray(self.data.sum(axis=axis, keepdims=keepdims)),
            (self,),
            backward,
            "sum",
        )

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # shape

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        try:
            out = self.data.reshape(shape)
        except ValueError as e:
            raise ShapeError(f"Cannot reshape {original} to {shape}") from e
        return Tensor.from_op(out, (self,), lambda g: (g.reshape(original),), "reshape")

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor.from_op(
            self.data.transpose(axes),
            (self,),
            lambda g: (g.transpose(inverse),),
            "transpose",
        )

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def broadcast_to(self, shape) -> "Tensor":
        original = self.shape
        try:
            out = np.broadcast_to(self.data, shape)
        except ValueError as e:
            raise ShapeError(f"Cannot broadcast {original} to {tuple(shape)}") from e
        return Tensor.from_op(
            out, (self,), lambda g: (unbroadcast(g, original),), "broadcast_to"
        )

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{grad})"


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype or np.float32))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of the last two axes, with broadcasting of leading axes.

    Backward: dA = dC @ B^T, dB = A^T @ dC (summed over broadcast axes).

    Raises:
        ShapeError: If the inner dimensions differ or an operand has rank < 2.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2. Got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f"Inner dimensions do not match: {a.shape} @ {b.shape}"
        )
    broadcast_shape(a.shape[:-2], b.shape[:-2])
    x, y = a.data, b.data

    def backward(g):
        ga = g @ np.swapaxes(y, -1, -2)
        gb = np.swapaxes(x, -1, -2) @ g
        return unbroadcast(ga, x.shape), unbroadcast(gb, y.shape)

    return Tensor.from_op(x @ y, (a, b), backward, "matmul")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(str(e)) from e
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))

    return Tensor.from_op(out, tensors, backward, "concat")
