"""Optional numba acceleration.

Kernels are written once as plain Python/numpy loops and compiled with
``numba.njit`` when numba is importable and not disabled. Setting
``HYBRIDSIM_DISABLE_NUMBA=1`` forces the vectorised numpy path everywhere.
"""

import logging
import os

_DISABLED = os.environ.get("HYBRIDSIM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by HYBRIDSIM_DISABLE_NUMBA")
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def use_numba() -> bool:
    return HAVE_NUMBA
