"""
Numba shim.

Set ``SPLP_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy
(useful for debugging and for checking that both paths agree).
"""
import os
import warnings

DISABLED = os.environ.get("SPLP_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if DISABLED:
        raise ImportError
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    if not DISABLED:
        warnings.warn("numba is not installed - kernels run in pure Python and will be slow")
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kw):
        # bare @njit and @njit(...) both supported
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


def jit_enabled():
    return HAVE_NUMBA
