import numpy as np
import pytest

from gwv import scenes
from gwv.measures import total_mass
from gwv.report import all_passed
from gwv.varifolds import weight_measure, willmore


def test_registry_names():
    assert set(scenes.registry()) == {"osc", "conc", "concdiff", "cusp", "cross", "triple", "trisegment",
                                      "disk", "doubled_circle", "smooth", "coarea", "lsc"}


def test_registry_entries_carry_expectations():
    for e in scenes.registry().values():
        assert e.default_p > 1 and e.description
        for q, v, prov in e.expectations:
            assert prov.startswith(("[PAPER]", "[DERIVED"))


def test_empty_registry(monkeypatch):
    monkeypatch.setenv("GWV_EMPTY_REGISTRY", "1")
    assert scenes.registry() == {}
    with pytest.raises(ValueError):
        scenes.run_scene("disk")


def test_unknown_counterexample():
    with pytest.raises(ValueError, match="unknown scene"):
        scenes.counterexample_scene("spiral")


def test_cross_boundary_and_cross_varifolds():
    s = scenes.cross_scene()
    V = s.varifolds["cross"]
    # straight segments: the energy is the mass
    assert willmore(V.with_curvature(lambda x: np.zeros_like(x)), 1.3) == pytest.approx(V.mass(), rel=1e-12)
    both = s.varifolds["boundary+cross"]
    assert both.mass() == pytest.approx(s.varifolds["boundary"].mass() + V.mass(), rel=1e-12)


def test_cusp_report():
    rows = {r.quantity: r for r in scenes.run_cusp()}
    assert all(r.passed for r in rows.values())
    assert rows["|W(V_nu) - G(Phi)| / G(Phi)"].value <= 1e-6
    assert rows["m mass"].value == pytest.approx(2.0, rel=1e-3)


@pytest.mark.parametrize("name", ["disk", "doubled_circle", "trisegment", "triple"])
def test_cheap_scenes_pass(name):
    assert all_passed(scenes.run_scene(name))


def test_run_scene_respects_p():
    a = {r.quantity: r.value for r in scenes.run_scene("disk", 2.0)}
    b = {r.quantity: r.value for r in scenes.run_scene("disk", 3.0)}
    assert a != b


def test_scene_points_labels():
    pts = scenes.scene_points("triple")
    assert len(pts) > 0
    labels = {lab for lab, _, _ in pts}
    assert all(isinstance(lab, str) for lab in labels)
    assert all(np.isfinite([x for _, x, _ in pts]))


def test_scene_points_for_limits():
    pts = scenes.scene_points("conc")
    r = np.hypot([x for _, x, _ in pts], [y for _, _, y in pts])
    np.testing.assert_allclose(r, 1.0, atol=1e-12)


def test_concentration_mass_of_limit():
    from gwv.young import canonical_limit
    from gwv.varifolds import from_young
    assert abs(total_mass(weight_measure(from_young(canonical_limit("conc")))) - 8 * np.pi) <= 0.005 * 8 * np.pi


def test_weight_sequence_probe_liminf():
    for kind in ("osc", "conc", "concdiff"):
        rep = scenes.weight_sequence_probe(kind)
        assert rep.liminf_ok


def test_mollified_sequence_dominates_limit():
    nus, mus, f, (nu, mu) = scenes.mollified_sequence(3)
    from gwv.measures import g_functional
    G = g_functional(nu, mu, f)
    for a, b in zip(nus, mus):
        assert g_functional(a, b, f) >= G - 1e-9 * max(1.0, G)


@pytest.mark.parametrize("kind", ["osc", "conc", "concdiff"])
def test_identification_rows_pass(kind):
    assert all_passed(scenes.identification_rows(kind))
