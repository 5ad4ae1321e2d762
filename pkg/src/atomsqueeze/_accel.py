"""Backend switch for the compiled kernels.

Set ``ATOMSQUEEZE_DISABLE_NUMBA=1`` to force the pure-numpy code path.
"""
import os

_flag = os.environ.get("ATOMSQUEEZE_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, fastmath=False)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
