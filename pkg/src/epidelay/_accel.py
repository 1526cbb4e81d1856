"""Numba acceleration switch.

Hot kernels are written as plain loops over numpy arrays and compiled with
``numba.njit`` when available. Setting the environment variable
``EPIDELAY_NO_NUMBA=1`` (or running without numba installed) selects the
uncompiled / vectorized-numpy fallback paths instead. Both paths produce
bit-identical results; see ``benchmarks/bench_kernels.py`` for a speed
comparison.
"""

import os

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("EPIDELAY_NO_NUMBA", "") != "1"


def maybe_njit(**options):
    """Decorator: ``njit(**options)`` when acceleration is on, no-op otherwise.

    Compiled functions keep the original under ``.py_func`` so the pure
    path stays callable for benchmarks and cross-checks.
    """

    def wrap(func):
        if USE_NUMBA:
            return _njit(**options)(func)
        return func

    return wrap
