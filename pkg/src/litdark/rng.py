"""Counter-based uniforms (SplitMix64 finaliser keyed per stream).

Draw ``k`` of stream ``key`` is ``mix(key + (k + 1) * GOLDEN)``, so any draw
can be regenerated from (key, counter) alone and the numba and numpy kernels
produce the same sequence.
"""
import numpy as np

from ._backend import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def mix64(x):
    z = x
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def uniform(key, counter):
    """Uniform on the open interval (0, 1)."""
    x = mix64(key + (counter + np.uint64(1)) * GOLDEN)
    return ((x >> _S11) + 0.5) * _INV53


def mix64_np(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (x ^ (x >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def uniform_np(key, counter):
    key = np.asarray(key, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = mix64_np(key + (counter + np.uint64(1)) * GOLDEN)
    return ((x >> _S11).astype(np.float64) + 0.5) * _INV53


def path_keys(seed: int, n_paths: int, first_path: int = 0) -> np.ndarray:
    """One independent stream key per path id."""
    ids = np.arange(first_path, first_path + n_paths, dtype=np.uint64)
    base = mix64_np(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(0x5DEECE66D))
    with np.errstate(over="ignore"):
        return mix64_np(base ^ mix64_np(ids * GOLDEN + np.uint64(0x632BE59BD9B4E019)))
