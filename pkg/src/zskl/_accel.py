"""Backend selection for the hot kernels.

Numba is used when importable unless ``ZSKL_DISABLE_NUMBA`` is set to a
truthy value, in which case the vectorised numpy path runs instead.
"""

from __future__ import annotations

import contextlib
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None

_TRUTHY = {"1", "true", "yes", "on"}


def _env_disabled() -> bool:
    return os.environ.get("ZSKL_DISABLE_NUMBA", "").strip().lower() in _TRUTHY


BACKEND = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"


def njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend() -> str:
    return BACKEND


def set_backend(name: str) -> None:
    global BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    BACKEND = name


@contextlib.contextmanager
def use_backend(name: str):
    prev = BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def thread_count(default: int = 1) -> int:
    """Worker count: ``ZSKL_THREADS`` wins over the caller's value."""
    env = os.environ.get("ZSKL_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"ZSKL_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return max(1, int(default))
