"""Optional numba acceleration.

Hot loops are written once as plain Python over numpy arrays. When numba is
importable and ``PIKERNEL_DISABLE_NUMBA`` is unset (or ``0``), they are
compiled with ``numba.njit``. Otherwise every caller falls back to a
vectorised numpy implementation of the same kernel.
"""
from __future__ import annotations

import os
import warnings

__all__ = ["HAS_NUMBA", "USE_NUMBA", "njit", "PerformanceWarning", "set_backend", "backend"]


class PerformanceWarning(UserWarning):
    """Raised when the numba backend is requested but unavailable."""


try:
    import numba as _numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAS_NUMBA = False


def _env_disabled() -> bool:
    flag = os.environ.get("PIKERNEL_DISABLE_NUMBA", "0").strip().lower()
    return flag not in ("", "0", "false", "no")


USE_NUMBA = HAS_NUMBA and not _env_disabled()


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def set_backend(name: str) -> None:
    """Switch between ``"numba"`` and ``"numpy"`` at runtime (benchmarks, tests)."""
    global USE_NUMBA
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        warnings.warn("numba is not available, using numpy kernels", PerformanceWarning)
        USE_NUMBA = False
        return
    USE_NUMBA = name == "numba"


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
