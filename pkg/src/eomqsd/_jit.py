"""Optional numba acceleration.

Set ``EOMQSD_DISABLE_NUMBA=1`` in the environment to force the pure-numpy
kernels (useful for debugging and for benchmarking the two paths).
"""

import os

_flag = os.environ.get("EOMQSD_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag in ("1", "true", "yes", "on")

try:
    if DISABLED_BY_ENV:
        raise ImportError("numba disabled by EOMQSD_DISABLE_NUMBA")
    from numba import njit
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f
        return wrapper


USE_NUMBA = HAS_NUMBA
