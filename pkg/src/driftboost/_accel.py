"""Numba switch.

Set ``DRIFTBOOST_DISABLE_NUMBA=1`` before import to run every kernel through
its pure-numpy twin. Useful for debugging and on platforms without LLVM.
"""
import os
from contextlib import contextmanager

_FLAG = os.environ.get("DRIFTBOOST_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes", "on")

# the bundled TBB is too old for numba; skip straight to omp/workqueue
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not NUMBA_DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


if numba is not None:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


def max_threads():
    return numba.config.NUMBA_NUM_THREADS if numba is not None else 1


@contextmanager
def thread_limit(n_threads):
    """Temporarily cap numba's worker count (clamped to the launch maximum)."""
    if numba is None or not n_threads:
        yield
        return
    previous = numba.get_num_threads()
    numba.set_num_threads(max(1, min(int(n_threads), max_threads())))
    try:
        yield
    finally:
        numba.set_num_threads(previous)
