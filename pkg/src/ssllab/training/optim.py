"""Adam, learning rate scaling and schedules."""
import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigError, IncompleteBackwardError, ScheduleExhaustedError
from ..nn.module import Parameter


REFERENCE_BATCH_SIZE = 256
SCHEDULE_KINDS = ("cosine", "constant")


def pretrain_lr(base: float, batch_size: int) -> float:
    """base x batch_size / 256, with the effective batch (micro-batch x accumulation).

    Examples
    --------
    >>> sl.pretrain_lr(1e-3, 64 * 8)
    0.002
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1. Got {batch_size}")
    return base * batch_size / REFERENCE_BATCH_SIZE


@dataclass
class Schedule:
    """Learning rate per applied optimizer step, for steps 0 to total_steps."""

    base_lr: float
    total_steps: int
    kind: str = "cosine"

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"kind must be one of {SCHEDULE_KINDS}. Got {self.kind!r}")
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1. Got {self.total_steps}")
        if self.base_lr < 0:
            raise ConfigError(f"base_lr must be >= 0. Got {self.base_lr}")

    def lr(self, step: int) -> float:
        if self.kind == "constant":
            _check_step(self, step)
            return self.base_lr
        return cosine_lr(self, step)


def _check_step(schedule: Schedule, step: int) -> None:
    if step < 0 or step > schedule.total_steps:
        raise ScheduleExhaustedError(
            f"Step {step} is outside the schedule of {schedule.total_steps} steps."
        )


def cosine_lr(schedule: Schedule, step: int) -> float:
    """base_lr x 0.5 x (1 + cos(pi t / T)), without warmup.

    Raises:
        ScheduleExhaustedError: If step > T.
    """
    _check_step(schedule, step)
    return schedule.base_lr * 0.5 * (1 + math.cos(math.pi * step / schedule.total_steps))


@dataclass
class OptimizerState:
    """Adam moments by parameter name, and the number of applied steps t."""

    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    decoupled: bool = False
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, Parameter],
    grads: dict[str, np.ndarray | None],
    state: OptimizerState,
    lr: float,
) -> None:
    """One bias-corrected Adam update, in place.

    Weight decay is classic L2 added to the gradient before the moments, or with
    'state.decoupled', subtracted from the weights after the Adam update.

    Raises:
        IncompleteBackwardError: If a parameter has no gradient.
    """
    missing = [name for name in params if grads.get(name) is None]
    if missing:
        raise IncompleteBackwardError(missing)

    beta1, beta2 = state.betas
    state.t += 1
    correction1 = 1 - beta1**state.t
    correction2 = 1 - beta2**state.t

    for name, param in params.items():
        w = param.data
        g = np.asarray(grads[name], dtype=w.dtype)
        if state.weight_decay and not state.decoupled:
            g = g + state.weight_decay * w

        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(w)
            v = np.zeros_like(w)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v

        update = (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        if state.weight_decay and state.decoupled:
            update = update + state.weight_decay * w
        param.data = (w - lr * update).astype(w.dtype)


class Adam:
    """Adam over named parameters, reading the gradients they collected.

    Args:
        params: (name, parameter) pairs, e.g. model.named_parameters().
        betas: Decay of the first and second moments.
        eps: Added to the denominator.
        weight_decay: L2 coefficient.
        decoupled: Decay the weights directly instead of adding L2 to the gradient.
    """

    def __init__(
        self,
        params,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        decoupled: bool = False,
    ) -> None:
        self.params = dict(params)
        self.state = OptimizerState(
            betas=betas, eps=eps, weight_decay=weight_decay, decoupled=decoupled
        )

    @property
    def steps(self) -> int:
        return self.state.t

    def step(self, lr: float) -> None:
        grads = {name: param.grad for name, param in self.params.items()}
        adam_step(self.params, grads, self.state, lr)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.grad = None

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}(n_params={len(self.params)}, t={self.state.t}, "
            f"weight_decay={self.state.weight_decay}, decoupled={self.state.decoupled})"
        )
