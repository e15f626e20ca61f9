"""Kernel dispatch: numba by default, numpy when ``LITDARK_BACKEND=numpy``."""
from .._backend import backend_name
from . import grid_np, sim_np
from .params import pack  # noqa: F401


def _mod(kind):
    if backend_name() == "numba":
        if kind == "grid":
            from . import grid_nb as m
        else:
            from . import sim_nb as m
        return m
    return grid_np if kind == "grid" else sim_np


def best_response_search(*args):
    return _mod("grid").best_response_search(*args)


def exchange_search(*args):
    return _mod("grid").exchange_search(*args)


def mm_step(*args):
    return _mod("grid").mm_step(*args)


def simulate(*args):
    return _mod("sim").simulate(*args)
