import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwv.curves import (ClosedCurve, CurveSystem, LevelFamily, curvature, curvature_norm,
                        curve_energy, equalize_chords, interior_indicator, level_energy,
                        nestedness_check, probe_lattice, resample_arclength, willmore_energy,
                        trace_distance, winding_index)


def circle(R=1.0, n=1024, center=(0.0, 0.0), mult=1):
    th = 2 * np.pi * np.arange(n) / n
    return ClosedCurve(np.column_stack([center[0] + R * np.cos(th), center[1] + R * np.sin(th)]), mult)


def star(n=512, k=5, amp=0.3):
    def path(t):
        r = 1 + amp * np.cos(k * t)
        return np.column_stack([r * np.cos(t), r * np.sin(t)])
    return ClosedCurve(path(equalize_chords(path, 2 * np.pi, n)))


def stadium(n=1024, flat=2.0, r=0.5):
    L = 2 * flat + 2 * np.pi * r

    def path(s):
        s = np.mod(s, L)
        out = np.zeros((len(s), 2))
        a = s < flat
        out[a] = np.column_stack([s[a] - flat / 2, np.full(a.sum(), -r)])
        b = (s >= flat) & (s < flat + np.pi * r)
        t = (s[b] - flat) / r - np.pi / 2
        out[b] = np.column_stack([flat / 2 + r * np.cos(t), r * np.sin(t)])
        c = (s >= flat + np.pi * r) & (s < 2 * flat + np.pi * r)
        out[c] = np.column_stack([flat / 2 - (s[c] - flat - np.pi * r), np.full(c.sum(), r)])
        d = s >= 2 * flat + np.pi * r
        t = (s[d] - 2 * flat - np.pi * r) / r + np.pi / 2
        out[d] = np.column_stack([-flat / 2 + r * np.cos(t), r * np.sin(t)])
        return out
    return ClosedCurve(path(equalize_chords(path, L, n))), path


def ray_cast(poly, x):
    """Even-odd rule with a horizontal ray to +infinity."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    inside = np.zeros(len(x), dtype=np.int64)
    for (x1, y1), (x2, y2) in zip(a, b):
        cond = (y1 > x[:, 1]) != (y2 > x[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x1 + (x[:, 1] - y1) * (x2 - x1) / (y2 - y1)
        inside ^= (cond & (x[:, 0] < xc)).astype(np.int64)
    return inside


def test_closed_curve_needs_sixteen_samples():
    with pytest.raises(ValueError):
        circle(n=8)


def test_closed_curve_rejects_nonuniform():
    th = np.sort(np.random.default_rng(0).uniform(0, 2 * np.pi, 64))
    with pytest.raises(ValueError):
        ClosedCurve(np.column_stack([np.cos(th), np.sin(th)]))


def test_resample_square_perimeter():
    sq = [[0, 0], [1, 0], [1, 1], [0, 1]]
    c = resample_arclength(sq, 64)
    assert len(c) == 64
    assert abs(c.length - 4.0) <= 0.004


def test_resample_coarse_circle():
    th = 2 * np.pi * np.arange(40) / 40
    c = resample_arclength(np.column_stack([2 * np.cos(th), 2 * np.sin(th)]), 256, method="spline")
    assert abs(c.length - 4 * np.pi) <= 1e-3 * 4 * np.pi


def test_resample_two_points_is_degenerate():
    with pytest.raises(ValueError):
        resample_arclength([[0, 0], [1, 0]], 32)


@pytest.mark.parametrize("R, tol", [(1.0, 1e-3), (0.5, 2e-3), (2.0, 1e-3)])
def test_circle_curvature(R, tol):
    k = curvature_norm(circle(R, 1024))
    assert np.max(np.abs(k - 1 / R)) <= tol


def test_circle_curvature_points_inward():
    c = circle(1.0, 256)
    k = curvature(c)
    assert np.all(np.sum(k * c.samples, axis=1) < 0)


def test_circle_curvature_constant():
    k = curvature_norm(circle(1.0, 1024))
    assert k.max() / k.min() <= 1 + 1e-3


def test_stadium_flats_have_zero_curvature():
    c, _ = stadium()
    k = curvature_norm(c)
    x, y = c.samples.T
    flat = np.abs(x) < 0.99
    assert flat.sum() > 100
    assert np.max(k[flat]) <= 1e-6


@pytest.mark.parametrize("R, p, mult, expected", [
    (1.0, 2.0, 1, 4 * np.pi),
    (1.0, 2.0, 2, 8 * np.pi),
    (2.0, 1.5, 1, 2 * np.pi * 2 * (1 + 2 ** -1.5)),
])
def test_willmore_energy_of_circles(R, p, mult, expected):
    W = willmore_energy(CurveSystem([circle(R, 1024, mult=mult)]), p)
    assert abs(W - expected) <= 0.005 * expected


def test_circle_energy_frozen():
    # regression value for the 1024-gon of the unit circle
    assert curve_energy(circle(1.0, 1024), 2.0) == pytest.approx(12.566350901100, rel=1e-11)


def test_willmore_rejects_small_exponent():
    with pytest.raises(ValueError, match="exponent must exceed 1"):
        willmore_energy(CurveSystem([circle()]), 1.0)


def test_interior_indicator_examples():
    s = CurveSystem([circle()])
    assert interior_indicator(s, (0.0, 0.0)) == 1
    assert interior_indicator(s, (3.0, 0.0)) == 0
    doubled = CurveSystem([circle(mult=2)])
    assert interior_indicator(doubled, (0.0, 0.0)) == 0
    assert winding_index(doubled, [[0.0, 0.0]])[0] == 2


def test_interior_indicator_on_trace_raises():
    with pytest.raises(ValueError, match="point on trace"):
        interior_indicator(CurveSystem([circle()]), (1.0, 0.0))


def test_interior_matches_ray_casting():
    c = star()
    s = CurveSystem([c])
    rng = np.random.default_rng(7)
    x = rng.uniform(-1.5, 1.5, size=(1000, 2))
    x = x[trace_distance(s, x) > s.contact_tol]
    np.testing.assert_array_equal(interior_indicator(s, x), ray_cast(c.samples, x))


def test_crossing_circles_rejected():
    with pytest.raises(ValueError):
        CurveSystem([circle(1.0, 256), circle(1.0, 256, center=(1.0, 0.0))])


def test_coincident_traces_accepted():
    s = CurveSystem([circle(1.0, 256), circle(1.0, 256)])
    assert len(s) == 2


def test_touching_circles_of_different_radius_rejected():
    # near the contact the tangents differ by more than the angle tolerance
    with pytest.raises(ValueError):
        CurveSystem([circle(1.0, 256), circle(0.5, 256, center=(0.5, 0.0))])


def test_nestedness_concentric():
    fam = LevelFamily([0.0, 1.0], [CurveSystem([circle(1.0, 256)]), CurveSystem([circle(0.5, 256)])])
    rep = nestedness_check(fam, probe_lattice((-1.2, 1.2, -1.2, 1.2), 60))
    assert rep.ok


def test_nestedness_crossing():
    fam = LevelFamily([0.0, 1.0], [CurveSystem([circle(1.0, 256)]),
                                   CurveSystem([circle(1.0, 256, center=(1.0, 0.0))])])
    rep = nestedness_check(fam, probe_lattice((-1.2, 2.2, -1.2, 1.2), 60))
    assert not rep.no_crossing and rep.crossings[0] > 0
    assert not rep.inclusion


def test_level_energy_constant_family():
    fam = LevelFamily(np.linspace(0, 1, 11), [CurveSystem([circle()])] * 11)
    assert abs(level_energy(fam, 2.0) - 4 * np.pi) <= 0.005 * 4 * np.pi


def test_level_energy_shrinking_circles():
    t = np.linspace(0, 0.5, 51)
    fam = LevelFamily(t, [CurveSystem([circle(1 - s, 1024)]) for s in t])
    expected = 2 * np.pi * (0.375 + np.log(2))
    assert abs(level_energy(fam, 2.0) - expected) <= 0.01 * expected


def test_level_energy_empty_family():
    fam = LevelFamily([0.0, 1.0], [CurveSystem([]), CurveSystem([])])
    assert level_energy(fam, 2.0) == 0.0


def test_levels_must_increase():
    with pytest.raises(ValueError):
        LevelFamily([1.0, 0.0], [CurveSystem([]), CurveSystem([])])


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(-10, 10), st.floats(-10, 10), st.floats(1.1, 4.0))
def test_willmore_rigid_motion_invariant(angle, dx, dy, p):
    c = star(256)
    a = willmore_energy(CurveSystem([c]), p)
    b = willmore_energy(CurveSystem([c.transformed(angle, (dx, dy))]), p)
    assert abs(a - b) <= 1e-9 * a


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0), st.integers(1, 3), st.floats(1.01, 5.0))
def test_willmore_at_least_length(R, mult, p):
    c = circle(R, 128, mult=mult)
    assert willmore_energy(CurveSystem([c]), p) >= c.length * mult


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 0.9), st.floats(0.05, 0.25))
def test_nested_interior_area_monotone(r1, gap):
    r2 = r1 - gap
    fam = LevelFamily([0.0, 1.0], [CurveSystem([circle(r1, 256)]), CurveSystem([circle(r2, 256)])])
    probes = probe_lattice((-1, 1, -1, 1), 50)
    rep = nestedness_check(fam, probes)
    assert rep.ok
    far = lambda s: trace_distance(s, probes) > s.contact_tol
    keep = far(fam.systems[0]) & far(fam.systems[1])
    a0 = interior_indicator(fam.systems[0], probes[keep]).sum()
    a1 = interior_indicator(fam.systems[1], probes[keep]).sum()
    assert a1 <= a0
