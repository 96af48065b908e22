"""Backend selection: numba-compiled kernels with a pure-numpy fallback.

The OXYFOREST_BACKEND environment variable ("numba" or "numpy") picks the
startup default; when unset, numba is used if it imports. set_backend
switches at runtime, which the backend comparison benchmark relies on.
"""

from __future__ import annotations

import os

from . import _kernels_numpy
from .errors import UsageError

try:
    from . import _kernels_numba

    HAVE_NUMBA = True
except ImportError:
    _kernels_numba = None
    HAVE_NUMBA = False

_NAMES = ("numba", "numpy")
_active: str | None = None


def available_backends() -> tuple[str, ...]:
    return _NAMES if HAVE_NUMBA else ("numpy",)


def _validate(name: str) -> str:
    name = name.strip().lower()
    if name not in _NAMES:
        raise UsageError(f"unknown backend {name!r}; choose one of {_NAMES}")
    if name == "numba" and not HAVE_NUMBA:
        raise UsageError("backend 'numba' requested but numba is not installed")
    return name


def get_backend() -> str:
    global _active
    if _active is None:
        env = os.environ.get("OXYFOREST_BACKEND", "")
        if env.strip():
            _active = _validate(env)
        else:
            _active = "numba" if HAVE_NUMBA else "numpy"
    return _active


def set_backend(name: str) -> str:
    """Switch the active backend; returns the previous one."""
    global _active
    prev = get_backend()
    _active = _validate(name)
    return prev


def kernels(name: str | None = None):
    """The kernel module for a backend (active backend when name is None)."""
    if name is None:
        name = get_backend()
    else:
        name = _validate(name)
    return _kernels_numba if name == "numba" else _kernels_numpy
