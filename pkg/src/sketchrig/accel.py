"""Kernel backend selection.

Hot pixel loops ship in two flavors: a numba ``@njit`` build and a pure
numpy fallback.  The backend is chosen once at import from the
``SKETCHRIG_NUMBA`` environment variable (``0``/``off``/``false`` disables
numba); :func:`set_backend` can override it at runtime, which the kernel
benchmark and the backend-equivalence tests use.
"""

import os

_FALSY = {"0", "off", "false", "no"}


def _env_wants_numba():
    return os.environ.get("SKETCHRIG_NUMBA", "1").strip().lower() not in _FALSY


try:
    import numba  # noqa: F401

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _HAVE_NUMBA = False

_use_numba = _HAVE_NUMBA and _env_wants_numba()


def use_numba():
    return _use_numba


def set_backend(numba_on):
    """Force the backend; returns the previous setting."""
    global _use_numba
    previous = _use_numba
    _use_numba = bool(numba_on) and _HAVE_NUMBA
    return previous


def numba_available():
    return _HAVE_NUMBA
