import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwv.measures import (OVERFLOW, Integrand, ParticleMeasure, VectorParticleMeasure,
                          abs_integrand, g_functional, lsc_probe, pair, power_integrand,
                          recession_check, sqrt1_integrand, total_mass)


def disk_grid(n=400, R=1.0):
    h = 2 * R / n
    x = -R + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = np.hypot(pts[:, 0], pts[:, 1]) < R
    return ParticleMeasure(pts[inside], np.full(inside.sum(), h * h))


def test_pair_point_mass():
    mu = ParticleMeasure([[0.0, 0.0]], [1.0])
    assert pair(mu, lambda x: np.ones(len(x))) == 1.0


def test_pair_circle_quadratic():
    th = 2 * np.pi * np.arange(1000) / 1000
    mu = ParticleMeasure(np.column_stack([np.cos(th), np.sin(th)]), np.full(1000, 2 * np.pi / 1000))
    assert abs(pair(mu, lambda x: np.sum(x * x, axis=1)) - 2 * np.pi) <= 1e-9


def test_pair_polar_singular_weight():
    # int_B |x|^{-3/2} dx = 2 pi / (2 - 3/2) = 4 pi
    mu = disk_grid(2000)
    val = pair(mu, lambda x: np.hypot(x[:, 0], x[:, 1]) ** -1.5)
    assert abs(val - 4 * np.pi) <= 0.02 * 4 * np.pi


def test_pair_rejects_nonfinite():
    mu = ParticleMeasure([[0.0, 0.0]], [1.0])
    with pytest.raises(ValueError), np.errstate(divide="ignore"):
        pair(mu, lambda x: 1.0 / np.hypot(x[:, 0], x[:, 1]))


def test_g_functional_constant_density():
    mu = disk_grid(64)
    nu = VectorParticleMeasure(mu.positions, np.column_stack([2 * mu.weights, 0 * mu.weights]))
    val = g_functional(nu, mu, power_integrand(2.0))
    assert abs(val - 4 * total_mass(mu)) <= 1e-12 * val


def test_g_functional_superlinear_singular_is_overflow():
    mu = disk_grid(32)
    nu = VectorParticleMeasure([[5.0, 5.0]], [[1.0, 0.0]])
    assert g_functional(nu, mu, power_integrand(2.0)) == OVERFLOW


def test_g_functional_unit_density_abs():
    mu = disk_grid(128)
    nu = VectorParticleMeasure(mu.positions, np.column_stack([mu.weights, 0 * mu.weights]))
    assert abs(g_functional(nu, mu, abs_integrand()) - total_mass(mu)) <= 1e-9


def test_g_functional_zero_weight_becomes_singular():
    mu = ParticleMeasure([[0.0, 0.0], [1.0, 0.0]], [0.0, 1.0])
    nu = VectorParticleMeasure([[0.0, 0.0]], [[0.0, 3.0]])
    # f(0) = 1 on the live particle plus |nu^s| = 3
    assert g_functional(nu, mu, sqrt1_integrand()) == pytest.approx(4.0, abs=1e-14)


def test_g_functional_singular_recession():
    mu = ParticleMeasure([[0.0, 0.0]], [2.0])
    nu = VectorParticleMeasure([[3.0, 0.0]], [[0.0, -0.5]])
    assert g_functional(nu, mu, sqrt1_integrand()) == pytest.approx(2.5, abs=1e-14)


def test_recession_homogeneous_is_zero():
    rep = recession_check(abs_integrand(), [[0.0, 0.0], [1.0, 2.0]], [1.0, 1e2, 1e4])
    assert rep.deviation == 0.0 and rep.ok


def test_recession_sqrt1_bound():
    t = [1.0, 1e2, 1e4]
    rep = recession_check(sqrt1_integrand(), [[0.0, 0.0]], t)
    assert rep.deviation <= 1.0 / t[-1]


def test_recession_superlinear_flagged():
    f = Integrand(lambda x, z: np.sum(z * z, axis=1), lambda x, d: np.zeros(len(d)))
    rep = recession_check(f, [[0.0, 0.0]], [1.0, 1e2, 1e4])
    assert rep.status == "no linear growth" and rep.deviation == OVERFLOW


def test_recession_rejects_unsorted_t():
    with pytest.raises(ValueError):
        recession_check(abs_integrand(), [[0.0, 0.0]], [10.0, 1.0])


def test_homogeneous_integrand_is_checked():
    with pytest.raises(ValueError):
        Integrand(lambda x, z: np.ones(len(z)), lambda x, d: np.zeros(len(d)), homogeneous=True)


def test_lsc_constant_sequence():
    mu = disk_grid(32)
    nu = VectorParticleMeasure(mu.positions, np.column_stack([mu.weights, mu.weights]))
    rep = lsc_probe([nu] * 4, [mu] * 4, sqrt1_integrand(), (nu, mu))
    assert rep.liminf_ok
    assert len(set(rep.values)) == 1
    assert all(abs(a) < 1e-12 and abs(b) < 1e-12 for a, b in rep.witness_residuals)


def test_lsc_detects_drop_below_limit():
    mu = ParticleMeasure([[0.0, 0.0]], [1.0])
    big = VectorParticleMeasure([[0.0, 0.0]], [[2.0, 0.0]])
    small = VectorParticleMeasure([[0.0, 0.0]], [[1.0, 0.0]])
    rep = lsc_probe([small] * 3, [mu] * 3, abs_integrand(), (big, mu))
    assert not rep.liminf_ok


def test_lsc_rejects_mismatched_lengths():
    mu = ParticleMeasure([[0.0, 0.0]], [1.0])
    with pytest.raises(ValueError):
        lsc_probe([], [mu], abs_integrand(), (None, mu))


def test_measure_negative_weight_rejected():
    with pytest.raises(ValueError):
        ParticleMeasure([[0.0, 0.0]], [-1.0])


def test_mass_additive_under_concat():
    a = ParticleMeasure([[0.0, 0.0], [1.0, 1.0]], [0.25, 0.5])
    b = ParticleMeasure([[2.0, 0.0]], [0.125])
    assert total_mass(a.concat(b)) == total_mass(a) + total_mass(b)


points = st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=40, unique=True)


@settings(max_examples=40, deadline=None)
@given(points, st.integers(0, 2**32 - 1))
def test_g_functional_permutation_invariant(pts, seed):
    rng = np.random.default_rng(seed)
    pos = np.array(pts)
    w = rng.uniform(0.1, 2.0, len(pos))
    v = rng.normal(size=(len(pos), 2))
    perm = rng.permutation(len(pos))
    mu1, nu1 = ParticleMeasure(pos, w), VectorParticleMeasure(pos, v)
    mu2, nu2 = ParticleMeasure(pos[perm], w[perm]), VectorParticleMeasure(pos[perm], v[perm])
    for f in (abs_integrand(), sqrt1_integrand(), power_integrand(1.5)):
        assert g_functional(nu1, mu1, f, 0.0) == g_functional(nu2, mu2, f, 0.0)


@settings(max_examples=40, deadline=None)
@given(points, st.floats(-3, 3), st.floats(-3, 3))
def test_pair_linear_in_g(pts, a, b):
    pos = np.array(pts)
    mu = ParticleMeasure(pos, np.linspace(0.1, 1.0, len(pos)))
    g1 = lambda x: np.cos(x[:, 0])
    g2 = lambda x: x[:, 1] ** 2
    lhs = pair(mu, lambda x: a * g1(x) + b * g2(x))
    rhs = a * pair(mu, g1) + b * pair(mu, g2)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs), abs(a) * pair(mu, lambda x: np.abs(g1(x))) + abs(b) * pair(mu, g2))


@settings(max_examples=40, deadline=None)
@given(points, st.integers(0, 2**32 - 1))
def test_abs_functional_matches_density_pairing(pts, seed):
    rng = np.random.default_rng(seed)
    pos = np.array(pts)
    w = rng.uniform(0.1, 2.0, len(pos))
    z = rng.normal(size=(len(pos), 2))
    mu = ParticleMeasure(pos, w)
    nu = VectorParticleMeasure(pos, z * w[:, None])
    lookup = {tuple(p): math.hypot(*q) for p, q in zip(pos, z)}
    ref = pair(mu, lambda x: np.array([lookup[tuple(p)] for p in x]))
    assert abs(g_functional(nu, mu, abs_integrand(), 0.0) - ref) <= 1e-9 * max(1.0, ref)


@settings(max_examples=30, deadline=None)
@given(points, st.floats(0.0, 1.0), st.floats(1e-3, 1e3))
def test_recession_of_homogeneous_is_exact(pts, c, t):
    f = Integrand(lambda x, z: (1 + c) * np.hypot(z[:, 0], z[:, 1]),
                  lambda x, d: (1 + c) * np.hypot(d[:, 0], d[:, 1]), homogeneous=True)
    rep = recession_check(f, pts, [t, 2 * t, 1e4 + 4 * t])
    assert rep.deviation == 0.0
