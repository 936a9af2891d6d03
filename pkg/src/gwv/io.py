"""JSON forms of measures, curve systems, Young measures, varifolds and fields.

Floats are written with ``repr`` so every value round-trips exactly.
"""

import json

import numpy as np

from .curves import ClosedCurve, CurveSystem, LevelFamily
from .fields import Domain, ScalarField
from .measures import ParticleMeasure, VectorParticleMeasure
from .varifolds import Varifold
from .young import YoungMeasure


def _rows(a):
    return np.asarray(a, dtype=float).tolist()


def dumps(obj):
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def save(obj, path):
    with open(path, "w") as fh:
        fh.write(dumps(to_json(obj)))
        fh.write("\n")


def load(path):
    with open(path) as fh:
        return json.load(fh)


# measures -------------------------------------------------------------------

def measure_to_json(mu):
    if isinstance(mu, VectorParticleMeasure):
        return {"kind": "vector", "particles": _rows(np.column_stack([mu.positions, mu.weights]))}
    return {"kind": "scalar", "particles": _rows(np.column_stack([mu.positions, mu.weights]))}


def measure_from_json(d):
    a = np.asarray(d.get("particles", []), dtype=float)
    kind = d.get("kind", "scalar")
    if kind == "scalar":
        a = a.reshape(-1, 3)
        return ParticleMeasure(a[:, :2], a[:, 2])
    if kind == "vector":
        a = a.reshape(-1, 4)
        return VectorParticleMeasure(a[:, :2], a[:, 2:])
    raise ValueError(f"unknown measure kind {kind!r}")


# curves ---------------------------------------------------------------------

def system_to_json(system):
    return {"curves": [{"multiplicity": c.multiplicity, "points": _rows(c.samples)}
                       for c in system.curves]}


def system_from_json(d, validate=True):
    curves = [ClosedCurve(c["points"], c.get("multiplicity", 1)) for c in d["curves"]]
    return CurveSystem(curves, validate=validate)


def family_to_json(fam):
    return {"levels": _rows(fam.levels), "systems": [system_to_json(s) for s in fam.systems]}


def family_from_json(d, validate=True):
    return LevelFamily(d["levels"], [system_from_json(s, validate) for s in d["systems"]])


# Young measures -------------------------------------------------------------

def young_to_json(nu):
    cells = np.concatenate([nu.z, nu.p[..., None]], axis=-1)
    ang = np.concatenate([nu.d, nu.q[..., None]], axis=-1)
    out = {
        "grid": {"centers": _rows(nu.centers), "areas": _rows(nu.areas),
                 "domain": nu.domain.to_dict(), "cell": nu.cell},
        "cells": _rows(cells),
        "lambda": _rows(np.column_stack([nu.lam.positions, nu.lam.weights])),
        "angular": _rows(ang),
    }
    if nu.lam_curvature is not None:
        out["curvature"] = _rows(nu.lam_curvature)
    if nu.tag:
        out["tag"] = nu.tag
    return out


def young_from_json(d):
    g = d["grid"]
    centers = np.asarray(g["centers"], dtype=float).reshape(-1, 2)
    n = len(centers)
    cells = np.asarray(d["cells"], dtype=float)
    cells = cells.reshape(n, -1, 3) if cells.size else np.zeros((n, 0, 3))
    lam = np.asarray(d.get("lambda", []), dtype=float).reshape(-1, 3)
    ang = np.asarray(d.get("angular", []), dtype=float)
    ang = ang.reshape(len(lam), -1, 3) if ang.size else np.zeros((len(lam), 0, 3))
    return YoungMeasure(centers, g["areas"], cells[..., :2], cells[..., 2], lam[:, :2], lam[:, 2],
                        ang[..., :2], ang[..., 2], Domain.from_dict(g["domain"]), g["cell"],
                        d.get("curvature"), d.get("tag", ""))


# varifolds ------------------------------------------------------------------

def varifold_to_json(V):
    out = {"particles": _rows(np.column_stack([V.positions, V.theta, V.weights]))}
    if V.curvature is not None and not np.any(np.isnan(V.curvature)):
        out["curvature"] = _rows(V.curvature)
    return out


def varifold_from_json(d):
    a = np.asarray(d["particles"], dtype=float).reshape(-1, 4)
    return Varifold(a[:, :2], a[:, 2], a[:, 3], d.get("curvature"))


# fields ---------------------------------------------------------------------

def field_to_json(u):
    out = {"values": _rows(u.values), "origin": list(u.origin), "spacing": u.h}
    if isinstance(u.domain, Domain):
        out["domain"] = u.domain.to_dict()
    return out


def field_from_json(d):
    dom = Domain.from_dict(d["domain"]) if "domain" in d else None
    return ScalarField(d["values"], d.get("origin", (0.0, 0.0)), d["spacing"],
                       d.get("gradient_floor"), dom)


def to_json(obj):
    if isinstance(obj, (ParticleMeasure, VectorParticleMeasure)):
        return measure_to_json(obj)
    if isinstance(obj, CurveSystem):
        return system_to_json(obj)
    if isinstance(obj, LevelFamily):
        return family_to_json(obj)
    if isinstance(obj, YoungMeasure):
        return young_to_json(obj)
    if isinstance(obj, Varifold):
        return varifold_to_json(obj)
    if isinstance(obj, ScalarField):
        return field_to_json(obj)
    raise TypeError(f"no JSON form for {type(obj).__name__}")
