import math
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest


src = str(Path(__file__).parent.parent) + "/src"

sys.path.insert(0, src)

import ssllab as sl
from ssllab.tensor.ops import sigmoid


def test_cross_entropy():
    uniform = sl.cross_entropy(sl.Tensor(np.zeros((4, 10))), np.array([0, 3, 5, 9]))
    assert round(float(uniform.data), 6) == 2.302585

    confident = np.full((1, 3), -100.0)
    confident[0, 1] = 100.0
    assert float(sl.cross_entropy(confident, np.array([1])).data) == pytest.approx(0, abs=1e-12)
    wrong = float(sl.cross_entropy(confident, np.array([0])).data)
    assert np.isfinite(wrong)
    assert wrong == pytest.approx(200, rel=1e-6)


def test_cross_entropy_gradient():
    logits = sl.Tensor(np.zeros((2, 4)), requires_grad=True, dtype=np.float64)
    sl.cross_entropy(logits, np.array([1, 3])).backward()
    # (softmax - one_hot) / N
    expected = (np.full((2, 4), 0.25) - np.eye(4)[[1, 3]]) / 2
    assert np.allclose(logits.grad, expected)


def test_cross_entropy_errors():
    with pytest.raises(sl.LabelError):
        sl.cross_entropy(sl.Tensor(np.zeros((2, 10))), np.array([0, 10]))
    with pytest.raises(sl.LabelError):
        sl.cross_entropy(sl.Tensor(np.zeros((2, 10))), np.array([0, -1]))
    with pytest.raises(sl.LabelError):
        sl.cross_entropy(sl.Tensor(np.zeros((2, 10))), np.array([0.0, 1.0]))
    with pytest.raises(sl.ShapeError):
        sl.cross_entropy(sl.Tensor(np.zeros((2, 10))), np.array([0, 1, 2]))


def test_binary_cross_entropy():
    zeros = sl.Tensor(np.zeros((3, 4)))
    targets = np.array([[0, 1, 1, 0], [1, 1, 1, 1], [0, 0, 0, 0]])
    assert float(sl.binary_cross_entropy(zeros, targets).data) == pytest.approx(math.log(2), abs=1e-6)

    # saturated logits stay finite
    big = sl.Tensor(np.array([[50.0, -50.0]]), dtype=np.float64)
    right = float(sl.binary_cross_entropy(big, np.array([[1, 0]])).data)
    wrong = float(sl.binary_cross_entropy(big, np.array([[0, 1]])).data)
    assert 0 <= right < 1e-20
    assert wrong == pytest.approx(50)


def test_binary_cross_entropy_symmetry():
    x = sl.make_rng(0).standard_normal((5, 3))
    t = (sl.make_rng(1).random((5, 3)) < 0.5).astype(int)
    a = float(sl.binary_cross_entropy(sl.Tensor(x, dtype=np.float64), t).data)
    b = float(sl.binary_cross_entropy(sl.Tensor(-x, dtype=np.float64), 1 - t).data)
    assert a == pytest.approx(b, abs=1e-12)


def test_binary_cross_entropy_errors():
    with pytest.raises(sl.LabelError):
        sl.binary_cross_entropy(sl.Tensor(np.zeros((1, 2))), np.array([[0, 2]]))
    with pytest.raises(sl.ShapeError):
        sl.binary_cross_entropy(sl.Tensor(np.zeros((1, 2))), np.array([[0, 1, 1]]))


def test_sigmoid_extreme_logits():
    logits = np.array([-1e4, -800.0, -30.0, 0.0, 30.0, 800.0, 1e4])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        scores = sigmoid(logits)
    assert scores[0] == 0.0 and scores[-1] == 1.0
    assert scores[3] == 0.5
    assert np.all(np.diff(scores) >= 0)
    assert sigmoid(np.array([2.0]))[0] == pytest.approx(1 / (1 + math.exp(-2.0)))


def main():
    test_cross_entropy()
    test_cross_entropy_gradient()
    test_cross_entropy_errors()
    test_binary_cross_entropy()
    test_binary_cross_entropy_symmetry()
    test_binary_cross_entropy_errors()
    test_sigmoid_extreme_logits()


if __name__ == "__main__":
    main()
