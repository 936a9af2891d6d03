import numpy as np
import pytest

from gwv import io as gio
from gwv.curves import ClosedCurve, CurveSystem, LevelFamily
from gwv.fields import Domain, ScalarField
from gwv.measures import ParticleMeasure, VectorParticleMeasure
from gwv.scenes import triple_scene
from gwv.varifolds import Varifold
from gwv.young import canonical_limit


def roundtrip(obj, reader, tmp_path):
    path = tmp_path / "obj.json"
    gio.save(obj, path)
    return reader(gio.load(path))


def circle(n=64, R=1.0, mult=1):
    th = 2 * np.pi * np.arange(n) / n
    return ClosedCurve(np.column_stack([R * np.cos(th), R * np.sin(th)]), mult)


def test_measures_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    mu = ParticleMeasure(rng.normal(size=(20, 2)), rng.uniform(size=20))
    back = roundtrip(mu, gio.measure_from_json, tmp_path)
    np.testing.assert_array_equal(back.positions, mu.positions)
    np.testing.assert_array_equal(back.weights, mu.weights)
    nu = VectorParticleMeasure(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
    back = roundtrip(nu, gio.measure_from_json, tmp_path)
    np.testing.assert_array_equal(back.weights, nu.weights)


def test_unknown_measure_kind():
    with pytest.raises(ValueError):
        gio.measure_from_json({"kind": "tensor", "particles": []})


def test_system_and_family_roundtrip(tmp_path):
    s = CurveSystem([circle(64, 1.0, 2)])
    back = roundtrip(s, gio.system_from_json, tmp_path)
    np.testing.assert_array_equal(back.curves[0].samples, s.curves[0].samples)
    assert back.curves[0].multiplicity == 2
    fam = LevelFamily([0.0, 0.5], [s, CurveSystem([circle(64, 0.5)])])
    back = roundtrip(fam, gio.family_from_json, tmp_path)
    np.testing.assert_array_equal(back.levels, fam.levels)
    assert len(back.systems) == 2


def test_young_roundtrip(tmp_path):
    nu = canonical_limit("conc")
    back = roundtrip(nu, gio.young_from_json, tmp_path)
    for a in ("centers", "areas", "z", "p", "d", "q"):
        np.testing.assert_array_equal(getattr(back, a), getattr(nu, a))
    np.testing.assert_array_equal(back.lam.weights, nu.lam.weights)
    assert back.tag == nu.tag


def test_varifold_roundtrip(tmp_path):
    V = triple_scene().varifolds["triple"]
    back = roundtrip(V, gio.varifold_from_json, tmp_path)
    np.testing.assert_array_equal(back.positions, V.positions)
    np.testing.assert_array_equal(back.theta, V.theta)
    np.testing.assert_array_equal(back.weights, V.weights)


def test_varifold_curvature_roundtrip(tmp_path):
    V = Varifold([[0.0, 0.0], [1.0, 0.0]], [0.1, 0.2], [1.0, 2.0], [[0.5, -0.25], [1e-300, 3.0]])
    back = roundtrip(V, gio.varifold_from_json, tmp_path)
    np.testing.assert_array_equal(back.curvature, V.curvature)


def test_field_roundtrip(tmp_path):
    u = ScalarField.from_function(lambda x: np.sin(x[:, 0]) + x[:, 1] / 3, 64, (0, 1, 0, 1),
                                  domain=Domain.disk(0.4, (0.5, 0.5)))
    back = roundtrip(u, gio.field_from_json, tmp_path)
    np.testing.assert_array_equal(back.values, u.values)
    assert back.h == u.h
    x = np.array([[0.5, 0.5], [0.95, 0.95]])
    np.testing.assert_array_equal(back.domain(x), u.domain(x))


def test_dumps_is_stable():
    mu = ParticleMeasure([[0.1, 0.2]], [1 / 3])
    a = gio.dumps(gio.to_json(mu))
    assert a == gio.dumps(gio.to_json(gio.measure_from_json(gio.to_json(mu))))


def test_dumps_rejects_nan():
    with pytest.raises(ValueError):
        gio.dumps({"x": float("nan")})
