"""Small shared helpers: deterministic sums and ordered parallel maps."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels


def psum(a):
    """Deterministic sum of a 1-d array (pairwise tree)."""
    return kernels.pairwise_sum(np.asarray(a, dtype=np.float64).ravel())


def psum_cols(a):
    """Deterministic column sums of a 2-d array."""
    a = np.asarray(a, dtype=np.float64)
    return np.array([psum(a[:, k]) for k in range(a.shape[1])])


_threads_override = None


def set_threads(n):
    global _threads_override
    _threads_override = None if n is None else max(1, int(n))


def thread_count():
    if _threads_override is not None:
        return _threads_override
    env = os.environ.get("GWV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def parallel_map(fn, items, threads=None):
    """Map ``fn`` over ``items`` and return results in input order."""
    items = list(items)
    n = thread_count() if threads is None else max(1, int(threads))
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
