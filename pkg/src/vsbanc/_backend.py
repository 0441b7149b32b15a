"""Kernel backend selection.

Set ``VSBANC_DISABLE_NUMBA=1`` to force the pure-numpy kernels. Numba is also
skipped silently when it cannot be imported.
"""

import os

_DISABLED = os.environ.get("VSBANC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

BACKEND = "numba" if HAVE_NUMBA else "numpy"
