"""Small helper functions."""
import hashlib
import os
from pathlib import Path

from .exceptions import ConfigError


THREADS_ENV_VAR = "SSL_LAB_THREADS"


def as_range(vals: tuple | list | int | float) -> tuple:
    """(low, high) from a scalar or a list/tuple of length 1 or 2.

    Examples
    --------
    >>> as_range(0.5), as_range([0.2, 1.0]), as_range((3,))
    ((0.5, 0.5), (0.2, 1.0), (3, 3))
    """
    if hasattr(vals, "__iter__"):
        vals = list(vals)
        if len(vals) == 2:
            return vals[0], vals[1]
        if len(vals) == 1:
            return vals[0], vals[0]
        raise ConfigError(f"Ranges are given as one or two values. Got {vals}")

    return vals, vals


def resolve_threads(threads: int | None = None) -> int:
    """Number of worker threads: the argument, else $SSL_LAB_THREADS, else 1."""
    if threads is None:
        threads = os.environ.get(THREADS_ENV_VAR) or 1
    try:
        threads = int(threads)
    except ValueError as e:
        raise ConfigError(f"Number of threads must be an integer. Got {threads!r}") from e
    if threads < 1:
        raise ConfigError(f"Number of threads must be >= 1. Got {threads}")
    return threads


def file_sha256(path: str | Path, chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        for chunk in iter(lambda: file.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write to a temporary file in the same folder, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "wb") as file:
        file.write(data)
        file.flush()
        os.fsync(file.fileno())
    os.replace(tmp, path)
