"""Base class for layers and models.

A Module finds its parameters, buffers and sub-modules by looking through its
attributes in assignment order, so names are hierarchical paths such as
"stages.0.conv1.weight" and a model's parameter list is deterministic.
"""
from collections.abc import Iterator

import numpy as np

from ..exceptions import IncompatibleCheckpointError
from ..tensor.tensor import Tensor


class Parameter(Tensor):
    """A trainable leaf tensor."""

    def __init__(self, data, dtype=None, name: str | None = None) -> None:
        super().__init__(data, requires_grad=True, dtype=dtype, name=name)


class Module:
    """Holds parameters, buffers (e.g. batch norm running stats) and sub-modules.

    Subclasses implement 'forward' and register buffers with 'register_buffer'.
    Buffers are saved in state dicts but never handed to the optimizer.
    """

    def __init__(self) -> None:
        self.training = True
        self._buffers: dict[str, np.ndarray] = {}

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value

    def _children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value

    def named_modules(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix, self
        for name, child in self._children():
            yield from child.named_modules(f"{prefix}{name}.")

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield f"{prefix}{name}", value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [param for _, param in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, value in self._buffers.items():
            yield f"{prefix}{name}", value
        for name, child in self._children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def num_parameters(self) -> int:
        return int(sum(param.size for param in self.parameters()))

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.grad = None

    def train(self, mode: bool = True) -> "Module":
        for _, module in self.named_modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def astype(self, dtype) -> "Module":
        """Cast all parameters and buffers in place, e.g. to float64 for grad checks."""
        for _, module in self.named_modules():
            for name, value in vars(module).items():
                if isinstance(value, Parameter):
                    value.data = value.data.astype(dtype)
                    value.grad = None
            module._buffers = {
                name: value.astype(dtype) for name, value in module._buffers.items()
            }
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        """Parameters and buffers by hierarchical name, in a stable order."""
        state = {name: param.data for name, param in self.named_parameters()}
        state.update(dict(self.named_buffers()))
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True):
        """Copy arrays into the parameters and buffers with matching names.

        Raises:
            IncompatibleCheckpointError: If a name is missing (strict) or a shape
                differs.
        """
        own = self.state_dict()
        missing = [name for name in own if name not in state]
        if strict and missing:
            raise IncompatibleCheckpointError(
                f"Missing tensor(s) {', '.join(missing[:5])}"
                + (f" and {len(missing) - 5} more" if len(missing) > 5 else "")
            )
        mismatched = [
            f"{name}: {state[name].shape} != {value.shape}"
            for name, value in own.items()
            if name in state and state[name].shape != value.shape
        ]
        if mismatched:
            raise IncompatibleCheckpointError(
                "Shape mismatch for " + "; ".join(mismatched[:5])
            )

        for name, param in self.named_parameters():
            if name in state:
                param.data = np.array(state[name], dtype=param.dtype)
        for prefix, module in self.named_modules():
            for name in module._buffers:
                if f"{prefix}{name}" in state:
                    module._buffers[name] = np.array(
                        state[f"{prefix}{name}"], dtype=module._buffers[name].dtype
                    )
        return self

    def extra_repr(self) -> str:
        return ""

    def __repr__(self) -> str:
        children = list(self._children())
        if not children:
            return f"{self.__class__.__name__}({self.extra_repr()})"
        lines = [f"{self.__class__.__name__}("]
        for name, child in children:
            child_repr = repr(child).replace("\n", "\n  ")
            lines.append(f"  ({name}): {child_repr}")
        lines.append(")")
        return "\n".join(lines)


class Sequential(Module):
    """Applies modules in order. Children are named "0", "1", ..."""

    def __init__(self, *modules: Module) -> None:
        super().__init__()
        for i, module in enumerate(modules):
            setattr(self, str(i), module)

    def __iter__(self) -> Iterator[Module]:
        return (module for _, module in self._children())

    def __len__(self) -> int:
        return len(list(self._children()))

    def __getitem__(self, i: int) -> Module:
        return list(self)[i]

    def forward(self, x):
        for module in self:
            x = module(x)
        return x
