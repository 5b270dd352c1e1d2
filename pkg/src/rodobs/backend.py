"""Kernel backend selection.

Two interchangeable implementations of the grid-level kernels exist:
`_kernels_numba` (jit-compiled, default) and `_kernels_numpy` (vectorized
fallback).  The active one is chosen at import from the environment flag

    RODOBS_BACKEND = auto | numba | numpy      (default: auto)

`auto` tries numba and silently falls back to numpy when numba is missing
or fails to import; asking for `numba` explicitly raises instead.  Tests
and benchmarks may switch at runtime via use(); everything in the package
looks the backend up per call through current(), so a switch takes effect
immediately.
"""

from __future__ import annotations

import os

from . import _kernels_numpy

_active = None


def _load(name):
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    raise ValueError(f"unknown backend {name!r} (choose 'auto', 'numba' or 'numpy')")


def use(name):
    """Activate a backend by name ('auto', 'numba' or 'numpy'); returns it."""
    global _active
    if name == "auto":
        try:
            _active = _load("numba")
        except ImportError:
            _active = _kernels_numpy
    else:
        _active = _load(name)
    return _active


def current():
    """The active kernel module (has NAME, rod_rhs, reconstruct_poses, ...)."""
    if _active is None:
        use(os.environ.get("RODOBS_BACKEND", "auto").strip().lower() or "auto")
    return _active


def name():
    return current().NAME
