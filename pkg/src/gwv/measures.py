"""Discrete Radon measures, pairings, and the convex functional G(nu, mu)."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._util import psum

#: Value returned by recession functions and G when the integrand is
#: superlinear and singular mass is present.
OVERFLOW = math.inf


def _canonical_order(pos, *extra):
    """Lexicographic order by (x, y) then by the extra columns."""
    keys = [np.asarray(e) for e in reversed(extra)]
    keys += [pos[:, 1], pos[:, 0]]
    return np.lexsort(keys) if len(pos) else np.zeros(0, dtype=np.int64)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class ParticleMeasure:
    """Positive measure sum_k w_k delta_{x_k}, stored in canonical order.

    Parameters
    ----------
    positions : (n, 2) array
    weights : (n,) array of nonnegative weights
    allow_boundary : bool
        Whether mass on the boundary of the domain is permitted.
    box : optional (xmin, xmax, ymin, ymax)
        Ambient box the positions must lie in.
    """

    def __init__(self, positions, weights, allow_boundary=True, box=None):
        pos = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if len(pos) != len(w):
            raise ValueError("positions and weights differ in length")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(w)):
            raise ValueError("non-finite particle data")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if box is not None:
            x0, x1, y0, y1 = box
            if np.any((pos[:, 0] < x0) | (pos[:, 0] > x1) | (pos[:, 1] < y0) | (pos[:, 1] > y1)):
                raise ValueError("particle outside the ambient box")
        order = _canonical_order(pos, w)
        self.order = order
        self.positions = _frozen(pos[order])
        self.weights = _frozen(w[order])
        self.allow_boundary = bool(allow_boundary)
        self.box = None if box is None else tuple(float(b) for b in box)

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return f"ParticleMeasure(n={len(self)}, mass={self.mass():.6g})"

    def mass(self):
        return total_mass(self)

    def concat(self, other):
        return ParticleMeasure(
            np.vstack([self.positions, other.positions]),
            np.concatenate([self.weights, other.weights]),
            self.allow_boundary and other.allow_boundary,
        )

    def scaled(self, c):
        return ParticleMeasure(self.positions, c * self.weights, self.allow_boundary, self.box)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros(0))


class VectorParticleMeasure:
    """R^2-valued measure sum_k w_k delta_{x_k} with vector weights."""

    def __init__(self, positions, weights):
        pos = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        w = np.asarray(weights, dtype=np.float64).reshape(-1, 2)
        if len(pos) != len(w):
            raise ValueError("positions and weights differ in length")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(w)):
            raise ValueError("non-finite particle data")
        order = _canonical_order(pos, w[:, 0], w[:, 1])
        self.positions = _frozen(pos[order])
        self.weights = _frozen(w[order])

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return f"VectorParticleMeasure(n={len(self)}, tv={self.total_variation():.6g})"

    def total_variation(self):
        return psum(np.hypot(self.weights[:, 0], self.weights[:, 1]))

    def concat(self, other):
        return VectorParticleMeasure(
            np.vstack([self.positions, other.positions]),
            np.vstack([self.weights, other.weights]),
        )

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros((0, 2)))


@dataclass(frozen=True)
class Integrand:
    """Integrand f(x, z) with recession function f_inf(x, d).

    Both callables are vectorized: ``x`` and ``z`` are (n, 2) arrays and the
    result is an (n,) array.  ``f_inf`` may be None when no concentration
    mass is ever paired.  ``superlinear`` integrands have f_inf identically
    equal to :data:`OVERFLOW`.
    """

    f: object
    f_inf: object = None
    homogeneous: bool = False
    superlinear: bool = False
    name: str = field(default="f", compare=False)

    def __post_init__(self):
        if self.homogeneous:
            if self.f_inf is None:
                raise ValueError("homogeneous integrand needs f_inf")
            rng = np.random.default_rng(12345)
            x = rng.uniform(-2.0, 2.0, size=(64, 2))
            ang = rng.uniform(0.0, 2 * np.pi, size=64)
            d = np.column_stack([np.cos(ang), np.sin(ang)])
            a = np.asarray(self.f(x, d), dtype=float)
            b = np.asarray(self.f_inf(x, d), dtype=float)
            if np.max(np.abs(a - b)) > 1e-9:
                raise ValueError("homogeneous integrand with f_inf != f on unit vectors")


def _norm(z):
    z = np.asarray(z, dtype=float)
    return np.hypot(z[:, 0], z[:, 1])


def abs_integrand():
    """f(x, z) = |z| (positively 1-homogeneous)."""
    return Integrand(lambda x, z: _norm(z), lambda x, d: _norm(d), homogeneous=True, name="abs")


def sqrt1_integrand():
    """f(x, z) = sqrt(1 + |z|^2), recession |z|."""
    return Integrand(lambda x, z: np.sqrt(1.0 + _norm(z) ** 2), lambda x, d: _norm(d), name="sqrt1")


def power_integrand(p):
    """f(x, z) = |z|^p for p > 1; superlinear, recession is the overflow sentinel."""
    p = float(p)
    return Integrand(
        lambda x, z: _norm(z) ** p,
        lambda x, d: np.full(len(np.atleast_2d(d)), OVERFLOW),
        superlinear=True,
        name=f"pow{p:g}",
    )


def total_mass(mu):
    """Total mass with a fixed-order pairwise sum."""
    return psum(mu.weights)


def _eval_checked(g, pos, shape):
    vals = np.asarray(g(pos), dtype=np.float64)
    if vals.shape == () or (vals.ndim == 1 and vals.shape[0] == 1 and len(pos) != 1):
        vals = np.broadcast_to(vals, shape)
    vals = vals.reshape(shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand not finite on support")
    return vals


def pair(mu, g):
    """Discrete integral of ``g`` against a scalar or vector particle measure.

    ``g`` maps an (n, 2) array of positions to (n,) values for a scalar
    measure, or (n, 2) vectors for a vector measure.
    """
    if len(mu) == 0:
        return 0.0
    if isinstance(mu, VectorParticleMeasure):
        vals = _eval_checked(g, mu.positions, (len(mu), 2))
        return psum(mu.weights[:, 0] * vals[:, 0] + mu.weights[:, 1] * vals[:, 1])
    vals = _eval_checked(g, mu.positions, (len(mu),))
    return psum(mu.weights * vals)


def _spacing(pos):
    if len(pos) < 2:
        return 1.0
    d, _ = cKDTree(pos).query(pos, k=2)
    d = d[:, 1]
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


def _match(nu_pos, mu_pos, match_radius):
    """Index of the mu particle matched to each nu particle, or -1."""
    idx = np.full(len(nu_pos), -1, dtype=np.int64)
    if len(mu_pos) == 0 or len(nu_pos) == 0:
        return idx
    lookup = {(float(a), float(b)): k for k, (a, b) in enumerate(mu_pos)}
    exact = np.array([lookup.get((float(a), float(b)), -1) for a, b in nu_pos], dtype=np.int64)
    idx[:] = exact
    rest = exact < 0
    if np.any(rest) and match_radius > 0:
        d, k = cKDTree(mu_pos).query(nu_pos[rest], k=1)
        k = np.where(d <= match_radius, k, -1)
        idx[rest] = k
    return idx


def g_functional(nu, mu, f, match_radius=None):
    """G(nu, mu) = int f(x, nu/mu) dmu + int f_inf(x, nu^s/|nu^s|) d|nu^s|.

    ``nu`` particles are matched to ``mu`` particles by exact position, or
    else to the nearest ``mu`` particle within ``match_radius`` (default a
    quarter of the median ``mu`` spacing).  Several ``nu`` particles matched
    to one ``mu`` particle are summed.  Unmatched particles, and particles
    matched to zero ``mu`` weight, form the singular part.
    """
    if match_radius is None:
        match_radius = 0.25 * _spacing(mu.positions)
    nw = nu.weights
    idx = _match(nu.positions, mu.positions, match_radius)
    matched = idx >= 0
    if np.any(matched):
        zero = mu.weights[np.maximum(idx, 0)] <= 0
        idx = np.where(matched & zero, -1, idx)
        matched = idx >= 0
    dens = np.zeros((len(mu), 2))
    if np.any(matched):
        np.add.at(dens, idx[matched], nw[matched])
    pos_mu = mu.positions
    ok = mu.weights > 0
    z = np.zeros((len(mu), 2))
    z[ok] = dens[ok] / mu.weights[ok, None]
    ac_terms = np.zeros(len(mu))
    if np.any(ok):
        ac_terms[ok] = np.asarray(f.f(pos_mu[ok], z[ok]), dtype=float) * mu.weights[ok]
    ac = psum(ac_terms)
    sing = ~matched
    sw = nw[sing]
    mag = np.hypot(sw[:, 0], sw[:, 1])
    nz = mag > 0
    if not np.any(nz):
        return ac
    if f.superlinear:
        return OVERFLOW
    if f.f_inf is None:
        raise ValueError("missing f_inf for singular mass")
    d = sw[nz] / mag[nz, None]
    vals = np.asarray(f.f_inf(nu.positions[sing][nz], d), dtype=float)
    if not np.all(np.isfinite(vals)):
        return OVERFLOW
    return ac + psum(vals * mag[nz])


@dataclass
class RecessionReport:
    deviation: float
    deviations: np.ndarray
    status: str

    @property
    def ok(self):
        return self.status == "ok"


def recession_check(f, sample_points, t_values, directions=16):
    """Max over samples of |f(x, t z)/t - f_inf(x, z)| at the largest t.

    ``directions`` is an int (equally spaced unit vectors) or an (m, 2)
    array.  Each t is rounded up to a power of two so that scaling z by t
    and dividing by t is exact; homogeneous integrands then show deviation
    0.  When the deviation grows with t the report carries status
    ``"no linear growth"`` and deviation :data:`OVERFLOW`.
    """
    t_values = np.asarray(t_values, dtype=float)
    if np.any(np.diff(t_values) <= 0):
        raise ValueError("t_values must be increasing")
    if np.isscalar(directions):
        ang = 2 * np.pi * np.arange(int(directions)) / int(directions)
        directions = np.column_stack([np.cos(ang), np.sin(ang)])
    dirs = np.asarray(directions, dtype=float)
    pts = np.asarray(sample_points, dtype=float).reshape(-1, 2)
    x = np.repeat(pts, len(dirs), axis=0)
    z = np.tile(dirs, (len(pts), 1))
    ref = np.asarray(f.f_inf(x, z), dtype=float)
    devs = []
    for t in 2.0 ** np.ceil(np.log2(t_values)):
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.asarray(f.f(x, t * z), dtype=float) / t
            devs.append(float(np.max(np.abs(v - ref))) if len(v) else 0.0)
    devs = np.array(devs)
    last = devs[-1]
    growing = len(devs) > 1 and devs[-1] > devs[-2] and devs[-1] > 1.0
    if not np.isfinite(last) or growing:
        return RecessionReport(OVERFLOW, devs, "no linear growth")
    return RecessionReport(float(last), devs, "ok")


def _witness_fields():
    """Five smooth witness fields for pairing residuals."""
    return [
        lambda x: np.column_stack([np.ones(len(x)), np.zeros(len(x))]),
        lambda x: np.column_stack([np.zeros(len(x)), np.ones(len(x))]),
        lambda x: np.column_stack([np.exp(-np.sum(x * x, axis=1)), x[:, 0]]),
        lambda x: np.column_stack([np.sin(x[:, 1]), np.cos(x[:, 0])]),
        lambda x: np.column_stack([x[:, 0] * x[:, 1], 1.0 / (1.0 + np.sum(x * x, axis=1))]),
    ]


@dataclass
class LscReport:
    values: list
    limit_value: float
    tail_min: float
    tolerance: float
    liminf_ok: bool
    witness_residuals: list


def lsc_probe(nu_seq, mu_seq, f, limit, tol=None, tail=None):
    """Probe G(nu, mu) <= liminf G(nu_h, mu_h) on a finite sequence.

    ``limit`` is the declared weak-* limit pair ``(nu, mu)``; it is accepted
    as given, and the report lists pairing residuals of the last term of the
    sequence against five witness fields (vector part) and their norms
    (scalar part).  The tail is the last ceil(n/2) terms.
    """
    nu_seq, mu_seq = list(nu_seq), list(mu_seq)
    if len(nu_seq) != len(mu_seq) or not nu_seq:
        raise ValueError("sequences must be nonempty and of equal length")
    nu, mu = limit
    vals = [g_functional(a, b, f) for a, b in zip(nu_seq, mu_seq)]
    glim = g_functional(nu, mu, f)
    n_tail = (len(vals) + 1) // 2 if tail is None else int(tail)
    tail_min = min(vals[-n_tail:])
    scale = max(1.0, abs(glim)) if np.isfinite(glim) else 1.0
    tol = 1e-6 * scale if tol is None else float(tol)
    ok = bool(glim <= tail_min + tol) if np.isfinite(glim) else bool(np.isinf(tail_min))
    res = []
    for g in _witness_fields():
        rv = pair(nu_seq[-1], g) - pair(nu, g)

        def gs(x, g=g):
            return np.hypot(*g(x).T)

        rs = pair(mu_seq[-1], gs) - pair(mu, gs)
        res.append((float(rv), float(rs)))
    return LscReport(vals, glim, tail_min, tol, ok, res)
