"""Numba switch.

Set ``CHANGEPOWER_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
implementation instead. The flag is read once, at import time.
"""

import os

_DISABLED = os.environ.get("CHANGEPOWER_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None

HAVE_NUMBA = _numba is not None


def njit(func):
    """``numba.njit(cache=True)`` when available, the plain function otherwise."""
    if _numba is None:
        return func
    return _numba.njit(cache=True)(func)
