"""Kernel backend selection.

Hot inner loops are compiled with numba when available. Setting
``ESKIN_BACKEND=numpy`` (or any failure to import numba) falls back to the
pure-numpy/python implementations, which compute identical results. The
choice is made once at import time; ``eskin bench kernels`` compares both.
"""

import os

_requested = os.environ.get("ESKIN_BACKEND", "numba").lower()

if _requested not in ("numba", "numpy"):
    raise ValueError(f"ESKIN_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

USE_NUMBA = False
if _requested == "numba":
    try:
        import numba  # noqa: F401

        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(func):
    """Compile ``func`` with numba in nopython mode, or return it unchanged."""
    if USE_NUMBA:
        from numba import njit

        return njit(cache=True)(func)
    return func
