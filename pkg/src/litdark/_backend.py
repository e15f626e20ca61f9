"""Kernel backend selection.

``LITDARK_BACKEND=numpy`` forces the vectorised numpy kernels; the default
uses numba when it imports cleanly.
"""
import os
import warnings

warnings.filterwarnings("ignore", message="The TBB threading layer")

try:
    import numba
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func
        return decorator


def backend_name():
    """Return ``"numba"`` or ``"numpy"`` according to the env flag."""
    requested = os.environ.get("LITDARK_BACKEND", "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"unknown LITDARK_BACKEND {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        return "numpy"
    return requested


__all__ = ["HAVE_NUMBA", "backend_name", "njit", "prange"]
