import math
import sys
from pathlib import Path

import numpy as np
import pytest


src = str(Path(__file__).parent.parent) + "/src"

sys.path.insert(0, src)

import ssllab as sl


def test_pretrain_lr():
    assert sl.pretrain_lr(1e-3, 512) == 2e-3
    assert sl.pretrain_lr(1e-3, 256) == 1e-3
    assert sl.pretrain_lr(1e-3, 64) == 2.5e-4
    with pytest.raises(sl.ConfigError):
        sl.pretrain_lr(1e-3, 0)


def test_cosine_lr():
    schedule = sl.Schedule(1e-3, 100)
    assert sl.cosine_lr(schedule, 0) == 1e-3
    assert sl.cosine_lr(schedule, 50) == pytest.approx(5e-4, abs=1e-18)
    assert sl.cosine_lr(schedule, 100) == pytest.approx(0, abs=1e-18)

    values = [schedule.lr(step) for step in range(101)]
    assert all(a >= b for a, b in zip(values, values[1:]))

    with pytest.raises(sl.ScheduleExhaustedError):
        sl.cosine_lr(schedule, 101)
    with pytest.raises(sl.ScheduleExhaustedError):
        sl.Schedule(1e-3, 10, "constant").lr(11)
    assert sl.Schedule(1e-3, 10, "constant").lr(10) == 1e-3


def test_schedule_validation():
    with pytest.raises(sl.ConfigError):
        sl.Schedule(1e-3, 0)
    with pytest.raises(sl.ConfigError):
        sl.Schedule(1e-3, 10, "step")
    with pytest.raises(sl.ConfigError):
        sl.Schedule(-1.0, 10)


def param(value, dtype=np.float64) -> sl.Parameter:
    return sl.Parameter(np.array(value, dtype=dtype))


def test_adam_first_step():
    w = param([1.0])
    state = sl.OptimizerState()
    sl.adam_step({"w": w}, {"w": np.array([1.0])}, state, lr=1e-3)
    assert state.t == 1
    # m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps)
    expected = 1.0 - 1e-3 * 1.0 / (1.0 + 1e-8)
    assert abs(float(w.data[0]) - expected) < 1e-12
    assert abs((float(w.data[0]) - 1.0) - (-9.99999e-4)) < 1e-9


def test_adam_zero_gradient():
    w = param([0.5, -2.0])
    sl.adam_step({"w": w}, {"w": np.zeros(2)}, sl.OptimizerState(), lr=0.1)
    assert w.data.tolist() == [0.5, -2.0]


def test_adam_lr_zero():
    w = param([[1.0, 2.0], [3.0, 4.0]], np.float32)
    before = w.data.copy()
    state = sl.OptimizerState()
    for _ in range(3):
        sl.adam_step({"w": w}, {"w": np.ones((2, 2))}, state, lr=0.0)
    assert np.array_equal(w.data, before)
    assert w.data.dtype == np.float32


def test_weight_decay():
    grad = np.array([0.3, -0.2])

    coupled = param([1.0, 2.0])
    sl.adam_step({"w": coupled}, {"w": grad}, sl.OptimizerState(weight_decay=0.1), lr=1e-2)
    manual = param([1.0, 2.0])
    sl.adam_step({"w": manual}, {"w": grad + 0.1 * manual.data}, sl.OptimizerState(), lr=1e-2)
    assert np.array_equal(coupled.data, manual.data)

    decoupled = param([1.0, 2.0])
    plain = param([1.0, 2.0])
    sl.adam_step(
        {"w": decoupled}, {"w": grad}, sl.OptimizerState(weight_decay=0.1, decoupled=True), lr=1e-2
    )
    sl.adam_step({"w": plain}, {"w": grad}, sl.OptimizerState(), lr=1e-2)
    assert np.allclose(decoupled.data, plain.data - 1e-2 * 0.1 * np.array([1.0, 2.0]))


def test_adam_bias_correction():
    w = param([0.0])
    state = sl.OptimizerState()
    for _ in range(5):
        sl.adam_step({"w": w}, {"w": np.array([2.0])}, state, lr=1e-3)
    # constant gradient: every bias-corrected step has size ~lr
    assert float(w.data[0]) == pytest.approx(-5e-3, rel=1e-6)
    assert state.m["w"][0] == pytest.approx(2.0 * (1 - 0.9**5))


def test_incomplete_backward():
    a, b = param([1.0]), param([2.0])
    with pytest.raises(sl.IncompleteBackwardError, match="b"):
        sl.adam_step({"a": a, "b": b}, {"a": np.ones(1), "b": None}, sl.OptimizerState(), 1e-3)
    assert a.data.tolist() == [1.0]

    optimizer = sl.Adam([("a", a), ("b", b)])
    (a * 2.0).sum().backward()
    with pytest.raises(sl.IncompleteBackwardError):
        optimizer.step(1e-3)
    assert optimizer.steps == 0


def test_adam_class():
    layer = sl.Linear(3, 2, rng=sl.make_rng(0))
    optimizer = sl.Adam(layer.named_parameters())
    before = layer.weight.data.copy()
    layer(sl.Tensor(np.ones((4, 3)))).sum().backward()
    optimizer.step(1e-2)
    assert optimizer.steps == 1
    assert not np.array_equal(layer.weight.data, before)
    optimizer.zero_grad()
    assert layer.weight.grad is None and layer.bias.grad is None
    assert "t=1" in repr(optimizer)


def test_accumulation_matches_full_batch():
    """Eight micro-batches of eight give the gradient of one batch of 64."""
    rng = sl.make_rng(1)
    x = rng.standard_normal((64, 5))
    y = rng.standard_normal((64, 1))

    def mlp(seed):
        return sl.Sequential(
            sl.Linear(5, 8, rng=sl.make_rng(seed)),
            sl.ReLU(),
            sl.Linear(8, 1, rng=sl.make_rng(seed, 1)),
        ).astype(np.float64)

    def mse(model, rows):
        diff = model(sl.Tensor(x[rows])) - sl.Tensor(y[rows])
        return (diff * diff).mean()

    full = mlp(2)
    mse(full, slice(None)).backward()

    accumulated = mlp(2)
    for i in range(8):
        (mse(accumulated, slice(8 * i, 8 * (i + 1))) * (1 / 8)).backward()

    for (name, a), (_, b) in zip(full.named_parameters(), accumulated.named_parameters()):
        assert np.allclose(a.grad, b.grad, rtol=1e-6, atol=1e-12), name


def main():
    test_pretrain_lr()
    test_cosine_lr()
    test_schedule_validation()
    test_adam_first_step()
    test_adam_zero_gradient()
    test_adam_lr_zero()
    test_weight_decay()
    test_adam_bias_correction()
    test_incomplete_backward()
    test_adam_class()
    test_accumulation_matches_full_batch()


if __name__ == "__main__":
    main()
