import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwv import kernels

IMPLS = kernels.backends()
needs_c = pytest.mark.skipif("cython" not in IMPLS, reason="compiled kernels not built")


def cases():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1.2, 1.2, size=(500, 2))
    th = 2 * np.pi * np.arange(256) / 256
    circle = np.column_stack([np.cos(th), np.sin(th)])
    segs = np.hstack([circle, np.roll(circle, -1, axis=0)])
    other = segs + [0.5, 0.0, 0.5, 0.0]
    return {
        "pairwise_sum": (rng.standard_normal(10001),),
        "winding_numbers": (x, circle),
        "min_distance": (x, segs),
        "crossing_count": (segs, other, 0.03),
        "bump_rows": (x, rng.uniform(-1, 1, size=(40, 2)), np.full(40, 0.3)),
        "bspline_scatter": (x, rng.uniform(size=500), (-1.5, -1.5), 0.1, 31, 31),
    }


@needs_c
@pytest.mark.parametrize("name", sorted(cases()))
def test_backends_agree(name):
    args = cases()[name]
    a = getattr(IMPLS["python"], name)(*args)
    b = getattr(IMPLS["cython"], name)(*args)
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    for u, v in zip(a, b):
        np.testing.assert_allclose(np.asarray(v, dtype=float), np.asarray(u, dtype=float), rtol=1e-13, atol=1e-15)


def test_pairwise_sum_exact_on_integers():
    for impl in IMPLS.values():
        assert impl.pairwise_sum(np.arange(1001, dtype=float)) == 500500.0
        assert impl.pairwise_sum(np.array([])) == 0.0


def test_winding_of_circle():
    th = 2 * np.pi * np.arange(128) / 128
    circle = np.column_stack([np.cos(th), np.sin(th)])
    for impl in IMPLS.values():
        w = impl.winding_numbers(np.array([[0.0, 0.0], [2.0, 0.0]]), circle)
        assert list(np.asarray(w)) == [1, 0]


def test_pure_python_switch():
    env = dict(os.environ, GWV_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from gwv import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_c
@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), max_size=300))
def test_pairwise_sum_bitwise_identical(xs):
    a = np.array(xs, dtype=float)
    assert IMPLS["cython"].pairwise_sum(a) == IMPLS["python"].pairwise_sum(a)
