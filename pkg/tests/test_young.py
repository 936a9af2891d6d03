import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwv.fields import Domain, JumpSet, ScalarField
from gwv.measures import abs_integrand, power_integrand, sqrt1_integrand, Integrand
from gwv.young import (GeneratorSequence, YoungMeasure, add, barycenter, canonical_example,
                       canonical_limit, canonical_profile, du_measure, extrapolate, from_bv,
                       gy_membership_report, identify_limit, pairing, zero_like)


def square_field(fn, n=64, bounds=(0.0, 1.0, 0.0, 1.0)):
    return ScalarField.from_function(fn, n, bounds, domain=Domain.box(bounds))


def disk_indicator(height=1.0, n=128):
    bounds = (-2.0, 2.0, -2.0, 2.0)
    u = ScalarField.from_function(lambda x: height * (np.hypot(x[:, 0], x[:, 1]) < 1), n, bounds,
                                  domain=Domain.box(bounds))
    th = 2 * np.pi * np.arange(2048) / 2048
    poly = np.column_stack([np.cos(th), np.sin(th)])
    jumps = JumpSet.from_polylines([poly], 0.0, height)
    return u, jumps


def test_pairing_trivial_young_measure():
    u = square_field(lambda x: np.zeros(len(x)))
    assert pairing(from_bv(u), abs_integrand()) == 0.0


def test_pairing_oscillation_limit():
    assert abs(pairing(canonical_limit("osc"), abs_integrand()) - np.pi) <= 0.01 * np.pi


def test_pairing_concentration_limit():
    assert abs(pairing(canonical_limit("conc"), abs_integrand()) - 8 * np.pi) <= 0.005 * 8 * np.pi


def test_pairing_needs_recession_on_lambda():
    f = Integrand(lambda x, z: np.hypot(z[:, 0], z[:, 1]))
    with pytest.raises(ValueError):
        pairing(canonical_limit("conc"), f)


def test_pairing_superlinear_with_lambda_overflows():
    assert pairing(canonical_limit("conc"), power_integrand(2.0)) == np.inf


@pytest.mark.parametrize("kind", ["osc", "conc"])
def test_barycenter_of_symmetric_limits_vanishes(kind):
    bar = barycenter(canonical_limit(kind))
    assert np.max(np.abs(bar.weights)) <= 1e-15


def test_barycenter_affine_field():
    u = square_field(lambda x: x[:, 0])
    bar = barycenter(from_bv(u))
    total = bar.weights.sum(axis=0)
    assert total == pytest.approx([1.0, 0.0], abs=1e-12)


def test_from_bv_affine_is_dirac_at_gradient():
    nu = from_bv(square_field(lambda x: x[:, 0]))
    assert nu.lambda_mass() == 0.0
    assert np.allclose(nu.z[:, 0], [1.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("height", [1.0, 2.0])
def test_from_bv_indicator_jump_mass(height):
    u, jumps = disk_indicator(height)
    nu = from_bv(u, jumps)
    assert abs(nu.lambda_mass() - 2 * np.pi * height) <= 0.005 * 2 * np.pi * height
    # the grid part sees no gradient across the declared jump
    assert np.max(np.abs(nu.z)) == 0.0
    # angular atoms are radial
    radial = np.abs(np.sum(nu.d[:, 0] * nu.lam.positions, axis=1)) / np.hypot(*nu.lam.positions.T)
    assert np.min(radial) >= 1 - 1e-5


def test_from_bv_jump_leaving_grid_raises():
    u = square_field(lambda x: np.zeros(len(x)))
    th = 2 * np.pi * np.arange(256) / 256
    jumps = JumpSet.from_polylines([np.column_stack([np.cos(th), np.sin(th)])], 0.0, 1.0)
    with pytest.raises(ValueError):
        from_bv(u, jumps)


def test_canonical_oscillation_profile():
    u, limit = canonical_example("osc", 6)
    prof = u.radial
    b = np.array(prof.breaks)
    assert len(b) == 2 ** 6 + 1
    assert prof(b).max() == pytest.approx(2.0 ** -6, abs=1e-15)
    assert prof(b).min() == 0.0
    assert np.all(np.abs(np.array(prof.slope)) == 1.0)
    assert limit.tag == "limit"


def test_canonical_concentration_profile():
    # V shape: 1 at |x| = 1 -+ 1/h, 0 on the unit circle, 0 outside the annulus
    prof = canonical_profile("conc", 8)
    assert prof(1.0) == 0.0
    assert prof(1 - 1 / 8) == pytest.approx(1.0)
    assert prof(1 + 1 / 8 - 1e-12) == pytest.approx(1.0, abs=1e-10)
    assert prof(0.5) == 0.0 and prof(1.5) == 0.0
    assert [r for r, _, _ in prof.jumps()] == [0.875, 1.125]
    assert prof.total_variation() == pytest.approx(8 * np.pi, rel=1e-12)


def test_canonical_diffuse_profile():
    prof = canonical_profile("concdiff", 8)
    b = np.array(prof.breaks)
    assert prof(b).max() == pytest.approx(1 / 16, abs=1e-12)
    assert sum(1 for s in prof.slope if s > 0) == 8


@pytest.mark.parametrize("h", [4, 5, 6])
def test_canonical_oscillation_total_variation(h):
    assert canonical_profile("osc", h).total_variation() == pytest.approx(np.pi, rel=1e-12)


def test_canonical_diffuse_total_variation():
    tv = [canonical_profile("concdiff", h).total_variation() for h in (8, 16, 32, 64)]
    # increases towards pi with a deficit that halves as h doubles
    deficit = 1 - np.array(tv) / np.pi
    assert np.all(deficit > 0)
    assert np.all(np.abs(deficit[1:] / deficit[:-1] - 0.5) <= 0.05)
    assert tv[0] == pytest.approx(57 * np.pi / 64, rel=1e-12)


def test_add_zero_is_identity():
    a = from_bv(*disk_indicator())
    b = add(a, zero_like(a))
    assert pairing(b, abs_integrand()) == pairing(a, abs_integrand())
    assert b.lambda_mass() == a.lambda_mass()


def test_add_rejects_oscillating_addend():
    a = canonical_limit("osc")
    with pytest.raises(ValueError, match="only GY\\(0\\)-shaped addends supported"):
        add(a, a)


def test_add_concentrations_concatenate():
    a = from_bv(*disk_indicator(1.0))
    b = from_bv(*disk_indicator(2.0))
    s = add(a, b)
    assert len(s.lam) == len(a.lam) + len(b.lam)
    assert s.lambda_mass() == pytest.approx(a.lambda_mass() + b.lambda_mass(), rel=1e-15)
    f = abs_integrand()
    assert pairing(s, f) == pytest.approx(pairing(a, f) + pairing(b, f), rel=1e-14)


def test_membership_smooth_field_passes():
    u = square_field(lambda x: np.sin(3 * x[:, 0]) * np.cos(2 * x[:, 1]))
    assert gy_membership_report(from_bv(u), u).ok


def test_membership_boundary_atom_fails():
    u = square_field(lambda x: x[:, 0])
    nu = from_bv(u)
    bad = nu.with_lambda([[0.0, 0.5]], [1.0], [[[1.0, 0.0]]], [[1.0]])
    rep = gy_membership_report(bad, u)
    assert not rep.boundary_ok and not rep.ok


def test_membership_indicator_passes():
    u, jumps = disk_indicator()
    rep = gy_membership_report(from_bv(u, jumps), u, jumps)
    assert rep.ok and rep.barycenter_residual <= 1e-12


def test_homogeneous_pairing_matches_gradient_integral():
    u = square_field(lambda x: x[:, 0] ** 2 + 0.5 * x[:, 1])
    f = abs_integrand()
    ref = du_measure(u).total_variation()
    assert abs(pairing(from_bv(u), f) - ref) <= 1e-6 * ref


def test_extrapolate_geometric_sequence():
    v = 3.0 + 0.5 ** np.arange(1, 6)
    lim, ok = extrapolate(v)
    assert lim == pytest.approx(3.0, abs=1e-12) and bool(ok)


def test_extrapolate_keeps_last_when_not_contracting():
    v = np.array([1.0, 2.0, 1.0, 2.0])
    lim, _ = extrapolate(v)
    assert lim == 2.0


def test_identify_constant_sequence_returns_du():
    u = ScalarField.from_function(lambda x: 1 - np.sum(x * x, axis=1), 64, (-1, 1, -1, 1),
                                  domain=Domain.disk(0.9))
    seq = GeneratorSequence(lambda h: u, None, "constant", (8, 16, 32))
    res = identify_limit(seq)
    assert res.lambda_mass <= 0.01 * res.mass_du


def test_young_measure_validates_probabilities():
    with pytest.raises(ValueError):
        YoungMeasure([[0.0, 0.0]], [1.0], [[[0.0, 0.0]]], [[0.5]], np.zeros((0, 2)), [],
                     np.zeros((0, 1, 2)), np.zeros((0, 1)), Domain.disk(1.0), 0.1)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_pairing_linear_in_integrand(a, b):
    nu = canonical_limit("osc")
    f1, f2 = abs_integrand(), sqrt1_integrand()
    g = Integrand(lambda x, z: a * f1.f(x, z) + b * f2.f(x, z))
    lhs = pairing(nu, g)
    rhs = a * pairing(nu, f1) + b * pairing(nu, f2)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(a) + abs(b))


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_barycenter_reproduces_du(a, b, c):
    u = square_field(lambda x: a * x[:, 0] + b * np.sin(2 * x[:, 1]) + c * x[:, 0] * x[:, 1], n=64)
    assert gy_membership_report(from_bv(u), u).barycenter_residual <= 1e-6
