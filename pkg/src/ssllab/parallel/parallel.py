"""Ordered parallel map over joblib workers."""
import functools
import itertools
from collections.abc import Callable, Collection, Iterable
from typing import Any

import joblib

from ..helpers import resolve_threads


class Parallel:
    """Run a function over many items on a pool of workers.

    Used to make the augmented views of a batch image by image, and to run the
    evaluation forward passes batch by batch. The results always come back in
    the order of the input items, so a run with 4 threads produces the same
    bytes as a run with 1.

    The default backend 'threading' needs no pickling and no main guard, and
    numpy releases the GIL in the heavy kernels. 'loky' and 'multiprocessing'
    run the function in separate processes; it must then be importable, and code
    outside functions should be guarded by 'if __name__ == "__main__"'.

    Tip for debugging: set threads=1 to run everything in the calling thread.

    Args:
        threads: Number of workers. Defaults to the SSL_LAB_THREADS environment
            variable, or 1 if it is not set.
        backend: joblib backend, "threading" (default), "loky" or
            "multiprocessing".
        **kwargs: Keyword arguments passed to joblib.Parallel.

    Raises:
        ConfigError: If threads is not a positive integer.

    Examples
    --------
    >>> def x2(x):
    ...     return x * 2
    >>> sl.Parallel(4).map(x2, [1, 2, 3])
    [2, 4, 6]
    """

    def __init__(
        self,
        threads: int | None = None,
        backend: str = "threading",
        **kwargs,
    ):
        self.threads = resolve_threads(threads)
        self.backend = backend
        self.kwargs = kwargs

    def map(
        self,
        func: Callable,
        iterable: Collection,
        kwargs: dict | None = None,
    ) -> list[Any]:
        """Call 'func' with each item as first argument.

        Args:
            func: Function to be run.
            iterable: Items passed one by one to func.
            kwargs: Keyword arguments passed to every call. Must be a dict, not
                unpacked into separate keyword arguments.

        Returns:
            The return values, in the order of 'iterable'.

        Examples
        --------
        >>> def scale(x, factor):
        ...     return x * factor
        >>> sl.Parallel(2).map(scale, [1, 2, 3], kwargs=dict(factor=10))
        [10, 20, 30]
        """
        return self._run(func, [(item,) for item in iterable], kwargs)

    def starmap(
        self,
        func: Callable,
        iterable: Collection[Iterable[Any]],
        kwargs: dict | None = None,
    ) -> list[Any]:
        """Call 'func' with each item unpacked as positional arguments.

        Examples
        --------
        >>> def add(x, y):
        ...     return x + y
        >>> sl.Parallel(3).starmap(add, [(1, 2), (2, 3), (3, 4)])
        [3, 5, 7]
        """
        return self._run(func, [tuple(item) for item in iterable], kwargs)

    def _run(self, func: Callable, arguments: list[tuple], kwargs: dict | None) -> list[Any]:
        if kwargs is None:
            kwargs = {}
        elif not isinstance(kwargs, dict):
            raise TypeError("kwargs must be a dict")

        # no more workers than items
        n_jobs = min(self.threads, len(arguments))
        if n_jobs <= 1:
            return list(itertools.starmap(functools.partial(func, **kwargs), arguments))

        with joblib.Parallel(n_jobs=n_jobs, backend=self.backend, **self.kwargs) as parallel:
            return parallel(joblib.delayed(func)(*args, **kwargs) for args in arguments)

    def __repr__(self):
        return f"{self.__class__.__name__}(threads={self.threads}, backend='{self.backend}')"
