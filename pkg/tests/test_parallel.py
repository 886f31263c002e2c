import sys
from pathlib import Path

import numpy as np
import pytest


src = str(Path(__file__).parent.parent) + "/src"

sys.path.insert(0, src)

import ssllab as sl


def func(x, *args, **kwargs):
    return x


def x2(x):
    return x * 2


def x2_with_arg_kwarg(x, plus, minus):
    return x * 2 + plus - minus


def add(x, y):
    return x + y


def test_attributes(monkeypatch):
    p = sl.Parallel(2, backend="loky")
    assert p.threads == 2
    assert p.backend == "loky"
    assert p.kwargs == {}
    assert repr(p) == "Parallel(threads=2, backend='loky')"

    res = sl.Parallel(2).map(x2, [])
    assert res == []

    monkeypatch.setenv("SSL_LAB_THREADS", "3")
    assert sl.Parallel().threads == 3
    monkeypatch.delenv("SSL_LAB_THREADS")
    assert sl.Parallel().threads == 1

    with pytest.raises(sl.ConfigError):
        sl.Parallel(0)
    with pytest.raises(TypeError):
        sl.Parallel(1).map(x2, [1], kwargs=[("plus", 1)])


def test_map():
    iterable = [1, 2, 3, 4, 5, 6]
    for threads in [1, 2, 4]:
        p = sl.Parallel(threads)
        assert p.map(func, iterable) == iterable
        assert p.map(x2, iterable) == [2, 4, 6, 8, 10, 12]
        results = p.map(x2_with_arg_kwarg, iterable, kwargs={"plus": 1, "minus": 2})
        assert results == [1, 3, 5, 7, 9, 11], results


def test_starmap():
    iterable = [(1, 2), (2, 3), (3, 4)]
    assert sl.Parallel(3).starmap(add, iterable) == [3, 5, 7]
    assert sl.Parallel(1).starmap(add, iterable) == [3, 5, 7]
    assert sl.Parallel(2).starmap(add, []) == []


def test_views_do_not_depend_on_threads():
    source = sl.synth_shapes(12, (3, 16, 16), classes=3, seed=2)
    policy = sl.AugmentationPolicy(seed=5)
    indices = np.arange(12)
    single = sl.view_batch(source, indices, policy, epoch=1, parallel=sl.Parallel(1))
    threaded = sl.view_batch(source, indices, policy, epoch=1, parallel=sl.Parallel(4))
    assert np.array_equal(single[0], threaded[0])
    assert np.array_equal(single[1], threaded[1])


def main():
    test_map()
    test_starmap()
    test_views_do_not_depend_on_threads()


if __name__ == "__main__":
    main()
