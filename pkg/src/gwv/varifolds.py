"""Particle varifolds on Omega x G(2,1), first variation and curvature."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from . import kernels
from ._util import parallel_map, psum
from .curves import curvature as curve_curvature
from .measures import ParticleMeasure, _canonical_order

#: Sup of |X| for the normalized radial/rotational field profile s(1-s^2)^3.
RADIAL_PEAK = (6.0 / 7.0) ** 3 / np.sqrt(7.0)


def line_angle(v):
    """Angle in [0, pi) of the line spanned by each row of ``v``."""
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    # pick the representative in the upper half plane so that v and -v agree exactly
    flip = (v[:, 1] < 0) | ((v[:, 1] == 0) & (v[:, 0] < 0))
    v = np.where(flip[:, None], -v, v)
    return _wrap(np.arctan2(v[:, 1], v[:, 0]))


def _wrap(a):
    # mod can round a tiny negative angle up to exactly pi
    a = np.mod(a, np.pi)
    return np.where(a >= np.pi, 0.0, a)


def perp_angle(v):
    """Angle in [0, pi) of the line z^perp."""
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    return line_angle(np.column_stack([-v[:, 1], v[:, 0]]))


class Varifold:
    """Weighted particles (x_k, theta_k, w_k) with optional curvature vectors.

    Particles are stored in canonical order (x, y, theta, w).  Rows of
    ``curvature`` that are unknown hold NaN.
    """

    def __init__(self, positions, theta, weights, curvature=None):
        x = np.asarray(positions, dtype=float).reshape(-1, 2)
        n = len(x)
        th = np.asarray(theta, dtype=float).reshape(n)
        w = np.asarray(weights, dtype=float).reshape(n)
        if np.any(w <= 0):
            raise ValueError("varifold weights must be positive")
        if np.any((th < 0) | (th >= np.pi)):
            raise ValueError("line angles must lie in [0, pi)")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ValueError("non-finite particle data")
        order = _canonical_order(x, th, w)
        self.positions = x[order]
        self.theta = th[order]
        self.weights = w[order]
        self.curvature = None
        if curvature is not None:
            self.curvature = np.asarray(curvature, dtype=float).reshape(n, 2)[order]
            self.curvature.setflags(write=False)
        for a in (self.positions, self.theta, self.weights):
            a.setflags(write=False)

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return f"Varifold(n={len(self)}, mass={self.mass():.6g})"

    def mass(self):
        return psum(self.weights)

    def tangents(self):
        return np.column_stack([np.cos(self.theta), np.sin(self.theta)])

    def concat(self, other):
        c = None
        if self.curvature is not None or other.curvature is not None:
            c = np.vstack([_curv_or_nan(self), _curv_or_nan(other)])
        return Varifold(np.vstack([self.positions, other.positions]),
                        np.concatenate([self.theta, other.theta]),
                        np.concatenate([self.weights, other.weights]), c)

    def scaled(self, c):
        return Varifold(self.positions, self.theta, c * self.weights, self.curvature)

    def with_curvature(self, curvature):
        if callable(curvature):
            curvature = curvature(self.positions)
        return Varifold(self.positions, self.theta, self.weights, curvature)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0))


def _curv_or_nan(v):
    return v.curvature if v.curvature is not None else np.full((len(v), 2), np.nan)


# test fields ----------------------------------------------------------------

def _profile(kind, r2, radius, inner):
    """Scalar profile phi and d phi / d(r^2) for bump and plateau kinds."""
    if kind == "plateau":
        r = np.sqrt(r2)
        s = np.clip((r - inner) / (radius - inner), 0.0, 1.0)
        phi = 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
        dphi_dr = -30.0 * s * s * (1.0 - s) ** 2 / (radius - inner)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(r > 0, dphi_dr / (2 * np.where(r > 0, r, 1.0)), 0.0)
        return phi, d
    s = np.clip(r2 / (radius * radius), 0.0, 1.0)
    om = 1.0 - s
    return om**3, -3.0 * om * om / (radius * radius)


@dataclass(frozen=True)
class TestField:
    """Compactly supported C^2 vector field with a closed-form Jacobian.

    ``kind`` selects X(x) = phi(|x-c|) A(x):
    "bump" A = direction; "radial" A = (x-c)/radius; "rotational"
    A = J(x-c)/radius with J the quarter turn.  ``profile`` is "bump",
    (1 - r^2/R^2)^3, or "plateau", equal to 1 for r <= inner and a quintic
    smoothstep down to 0 at R.
    """

    center: tuple
    radius: float
    kind: str = "bump"
    direction: tuple = (1.0, 0.0)
    profile: str = "bump"
    inner: float = 0.0
    scale: float = 1.0

    __test__ = False

    def __post_init__(self):
        if self.kind not in ("bump", "radial", "rotational"):
            raise ValueError(f"unknown test field kind {self.kind!r}")
        if self.profile == "plateau" and not 0 <= self.inner < self.radius:
            raise ValueError("plateau needs 0 <= inner < radius")

    @classmethod
    def axis(cls, center, radius, index, **kw):
        """Bump along coordinate direction ``index`` in {1, 2}."""
        if index not in (1, 2):
            raise ValueError("direction index must be 1 or 2")
        return cls(tuple(center), float(radius), "bump", (1.0, 0.0) if index == 1 else (0.0, 1.0), **kw)

    def inside(self, domain):
        """Whether the support lies inside a Domain."""
        c = np.asarray(self.center, dtype=float)[None, :]
        return bool(domain.boundary_distance(c)[0] >= self.radius)

    def _parts(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        d = x - np.asarray(self.center)
        r2 = np.sum(d * d, axis=1)
        phi, dphi = _profile(self.profile, r2, self.radius, self.inner)
        grad = 2.0 * dphi[:, None] * d
        return d, phi, grad

    def _a(self, d):
        if self.kind == "bump":
            a = np.broadcast_to(np.asarray(self.direction, dtype=float), d.shape)
            ja = np.zeros((2, 2))
        elif self.kind == "radial":
            a = d / self.radius
            ja = np.eye(2) / self.radius
        else:
            a = np.column_stack([-d[:, 1], d[:, 0]]) / self.radius
            ja = np.array([[0.0, -1.0], [1.0, 0.0]]) / self.radius
        return a, ja

    def __call__(self, x):
        d, phi, _ = self._parts(x)
        a, _ = self._a(d)
        return self.scale * phi[:, None] * a

    def jacobian(self, x):
        """dX_i/dx_j as an (n, 2, 2) array."""
        d, phi, grad = self._parts(x)
        a, ja = self._a(d)
        return self.scale * (phi[:, None, None] * ja[None] + a[:, :, None] * grad[:, None, :])

    def sup_norm(self):
        if self.kind == "bump":
            return self.scale * float(np.hypot(*self.direction))
        if self.profile == "bump":
            return self.scale * RADIAL_PEAK
        # plateau: |X| = phi r / R, sampled
        r = np.linspace(0.0, self.radius, 4097)
        phi, _ = _profile("plateau", r * r, self.radius, self.inner)
        return self.scale * float(np.max(phi * r / self.radius))


def tangential_divergence(V, X):
    """div_S X at every particle: t^T DX t."""
    t = V.tangents()
    J = X.jacobian(V.positions)
    return np.einsum("ni,nij,nj->n", t, J, t)


def first_variation(V, X):
    """delta V(X) = sum_k w_k t_k^T DX(x_k) t_k."""
    if len(V) == 0:
        return 0.0
    return psum(V.weights * tangential_divergence(V, X))


def weight_measure(V):
    """mu_V: drop the line angles."""
    return ParticleMeasure(V.positions, V.weights)


# constructors ---------------------------------------------------------------

def from_curve_system(system):
    """One particle per sample: tangent line, weight theta * ds, curvature."""
    pos, th, w, k = [], [], [], []
    for c in system.curves:
        pos.append(c.samples)
        th.append(line_angle(c.tangents()))
        w.append(np.full(len(c), c.multiplicity * c.spacing))
        k.append(curve_curvature(c))
    if not pos:
        return Varifold.empty()
    return Varifold(np.vstack(pos), np.concatenate(th), np.concatenate(w), np.vstack(k))


def from_young(nu, curvature=None):
    """Young varifold V_nu.

    Cells contribute (x, angle(z)^perp, area p |z|) per atom, and lambda
    particles contribute (x, angle(d)^perp, w q) per angular atom.
    ``curvature`` is an optional callable x -> H evaluated at every
    particle; otherwise lambda particles use the curvature they carry and
    cells have none.
    """
    zn = np.hypot(nu.z[..., 0], nu.z[..., 1])
    wc = nu.areas[:, None] * nu.p * zn
    keep = wc > 0
    ci = np.nonzero(keep)
    pos = [nu.centers[ci[0]]]
    th = [perp_angle(nu.z[keep])]
    w = [wc[keep]]
    curv = [np.full((len(w[0]), 2), np.nan)]
    if len(nu.lam) and nu.q.shape[1]:
        wl = nu.lam.weights[:, None] * nu.q
        kl = wl > 0
        li = np.nonzero(kl)
        pos.append(nu.lam.positions[li[0]])
        th.append(perp_angle(nu.d[kl]))
        w.append(wl[kl])
        if nu.lam_curvature is not None:
            curv.append(nu.lam_curvature[li[0]])
        else:
            curv.append(np.full((len(li[0]), 2), np.nan))
    pos = np.vstack(pos)
    c = np.vstack(curv)
    if curvature is not None:
        c = np.asarray(curvature(pos), dtype=float).reshape(-1, 2)
    if np.all(np.isnan(c)):
        c = None
    return Varifold(pos, np.concatenate(th), np.concatenate(w), c)


def from_level_family(family):
    """Union over levels of the curve varifolds, weighted by trapezoid weights."""
    out = Varifold.empty()
    parts = []
    for wt, system in zip(family.trapezoid_weights(), family.systems):
        if wt > 0 and len(system):
            parts.append(from_curve_system(system).scaled(wt))
    for p in parts:
        out = out.concat(p)
    return out


# energies -------------------------------------------------------------------

def willmore(V, p, H=None):
    """W(V) = sum_k w_k (1 + |H_k|^p)."""
    if not p > 1:
        raise ValueError("exponent must exceed 1")
    if H is None:
        H = V.curvature
    elif callable(H):
        H = H(V.positions)
    if len(V) == 0:
        return 0.0
    if H is None:
        raise ValueError("no curvature available")
    H = np.asarray(H, dtype=float).reshape(-1, 2)
    if np.any(np.isnan(H)):
        raise ValueError("no curvature available")
    return psum(V.weights * (1.0 + np.hypot(H[:, 0], H[:, 1]) ** p))


def curvature_measures(V, H=None):
    """(H mu_V, mu_V) as particle measures, merging particles that share a position.

    ``H`` is a callable x -> curvature vector, or None to use the curvature
    carried by ``V``.  Merging keeps one particle per position so that the
    density of the first measure against the second is H itself.
    """
    from .measures import ParticleMeasure, VectorParticleMeasure
    if len(V) == 0:
        return VectorParticleMeasure.empty(), ParticleMeasure.empty()
    pos, inv = np.unique(V.positions, axis=0, return_inverse=True)
    inv = inv.ravel()
    w = np.bincount(inv, V.weights, len(pos))
    if callable(H):
        k = np.asarray(H(pos), dtype=float).reshape(-1, 2)
    else:
        if V.curvature is None:
            raise ValueError("no curvature available")
        k = np.zeros((len(pos), 2))
        np.add.at(k, inv, V.curvature * V.weights[:, None])
        k /= np.where(w > 0, w, 1.0)[:, None]
    return VectorParticleMeasure(pos, k * w[:, None]), ParticleMeasure(pos, w)


# curvature estimation -------------------------------------------------------

@dataclass
class CurvatureEstimate:
    H: np.ndarray
    residual: float
    reg: float
    spacing: float
    n_equations: int
    coverage_min: int


def particle_spacing(V):
    if len(V) < 2:
        return 1.0
    d, _ = cKDTree(V.positions).query(V.positions, k=2)
    d = d[:, 1]
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


#: Lattice spacing of the bump battery in particle spacings.
LATTICE_FACTOR = 4.0
#: Bump radius in lattice spacings.
RADIUS_FACTOR = 1.5
#: Neighbourhood radius of the smoothing penalty in particle spacings.
NEIGHBOUR_FACTOR = 3.0
#: Default Tikhonov weight.
DEFAULT_REG = 1.0
#: Minimal number of bump supports containing each particle.
MIN_COVERAGE = 4


def bump_lattice(V, spacing, radius):
    """Lattice of bump centres whose supports meet the particles."""
    lo = V.positions.min(axis=0) - radius
    hi = V.positions.max(axis=0) + radius
    nx = int(np.ceil((hi[0] - lo[0]) / spacing)) + 1
    ny = int(np.ceil((hi[1] - lo[1]) / spacing)) + 1
    gx, gy = np.meshgrid(lo[0] + spacing * np.arange(nx), lo[1] + spacing * np.arange(ny), indexing="ij")
    c = np.column_stack([gx.ravel(), gy.ravel()])
    near = cKDTree(V.positions).query(c, k=1, distance_upper_bound=radius)[0] < radius
    return c[near]


def _first_variation_rows(V, rows, cols, gx, gy, n_b):
    """delta V(e_i b_j) for every bump j and i = 1, 2."""
    t = V.tangents()
    tg = gx * t[cols, 0] + gy * t[cols, 1]
    w = V.weights[cols]
    dv = np.zeros((n_b, 2))
    for i in range(2):
        contrib = w * t[cols, i] * tg
        # deterministic per-row sums: rows are sorted
        starts = np.searchsorted(rows, np.arange(n_b))
        ends = np.searchsorted(rows, np.arange(n_b), side="right")
        dv[:, i] = [psum(contrib[a:b]) for a, b in zip(starts, ends)]
    return dv


def estimate_curvature(V, reg=DEFAULT_REG, spacing=None, radius=None, centers=None):
    """Regularized least-squares inversion of delta V(X) = -int <X, H> dmu_V.

    Unknowns are the per-particle vectors H_k.  Each bump b_j of the
    battery gives two equations, one per coordinate direction.  The
    penalty reg * sum_k w_k |H_k - mean_k H|^2 ties each particle to the
    weighted mean over neighbours within three particle spacings; ``reg``
    is measured relative to the mean diagonal of the normal matrix.
    """
    n = len(V)
    if n == 0:
        raise ValueError("empty varifold")
    ds = particle_spacing(V)
    spacing = LATTICE_FACTOR * ds if spacing is None else float(spacing)
    radius = RADIUS_FACTOR * spacing if radius is None else float(radius)
    c = bump_lattice(V, spacing, radius) if centers is None else np.asarray(centers, dtype=float)
    rows, cols, b, gx, gy = kernels.bump_rows(V.positions, c, np.full(len(c), radius))
    cover = np.bincount(cols, minlength=n)
    if cover.min() < MIN_COVERAGE:
        raise ValueError(f"battery does not cover the varifold (min coverage {cover.min()})")
    cells = np.unique(np.floor(V.positions / spacing).astype(np.int64), axis=0)
    if 2 * len(c) < 2 * len(cells):
        raise ValueError("underdetermined battery")
    dv = _first_variation_rows(V, rows, cols, gx, gy, len(c))
    A = sp.csr_matrix((V.weights[cols] * b, (rows, cols)), shape=(len(c), n))
    # neighbourhood mean operator
    tree = cKDTree(V.positions)
    pairs = tree.query_pairs(NEIGHBOUR_FACTOR * ds, output_type="ndarray")
    if len(pairs):
        i = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(n)])
        j = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(n)])
    else:
        i = j = np.arange(n)
    W = sp.csr_matrix((V.weights[j], (i, j)), shape=(n, n))
    rs = np.asarray(W.sum(axis=1)).ravel()
    S = sp.diags(1.0 / rs) @ W
    D = sp.identity(n, format="csr") - S
    AtA = (A.T @ A).tocsr()
    scale = float(AtA.diagonal().mean()) / float(V.weights.mean())
    lam = reg * scale
    M = AtA + lam * (D.T @ sp.diags(V.weights) @ D) + 1e-12 * scale * float(V.weights.mean()) * sp.identity(n)
    M = M.tocsc()
    H = np.zeros((n, 2))
    for k in range(2):
        H[:, k] = spsolve(M, -(A.T @ dv[:, k]))
    res = dv + np.column_stack([A @ H[:, 0], A @ H[:, 1]])
    residual = float(np.max(np.abs(res)) / 2.0)
    return CurvatureEstimate(H, residual, reg, spacing, 2 * len(c), int(cover.min()))


# singular part detection ----------------------------------------------------

#: Bump radii of the singular-ratio battery, relative to the ball radius.
PROFILE_FRACTIONS = (1.0, 0.75, 0.5)
#: Number of constant directions in the singular-ratio battery.
N_DIRECTIONS = 8


@dataclass
class RatioProfile:
    radii: np.ndarray
    ratios: np.ndarray
    variation: np.ndarray
    mass: np.ndarray
    growth: np.ndarray

    def bounded(self, tol=0.2):
        """Relative variation of the ratio below ``tol``."""
        r = self.ratios
        return bool((r.max() - r.min()) / max(r.max(), 1e-300) < tol)

    def singular(self, factor=1.5):
        """The ratio grows by at least ``factor`` at every halving."""
        return bool(np.all(self.growth >= factor))


def _ball_variation(V, center, r):
    """sup over the normalized battery supported in B_r of |delta V(X)|."""
    c = np.asarray(center, dtype=float)
    ang = np.pi * np.arange(N_DIRECTIONS) / N_DIRECTIONS
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    best = 0.0
    for frac in PROFILE_FRACTIONS:
        rho = frac * r
        fields = [TestField(tuple(c), rho, "bump", tuple(e)) for e in dirs]
        fields.append(TestField(tuple(c), rho, "radial", scale=1.0 / RADIAL_PEAK))
        fields.append(TestField(tuple(c), rho, "rotational", scale=1.0 / RADIAL_PEAK))
        for X in fields:
            best = max(best, abs(first_variation(V, X)))
    return best


def singular_ratio(V, center, radii):
    """Profile of ||delta V||(B_r) / mu_V(B_r) over decreasing radii.

    ||delta V||(B_r) is estimated from below by the largest |delta V(X)|
    over a battery of fields with sup norm 1 supported in B_r: bumps along
    eight directions at three profile radii, plus radial and rotational
    fields at the same radii.  The smallest bump should hold eight or more
    particles; below that the quadrature noise reads as growth.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 4 or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be decreasing, at least four values")
    sub = V
    c = np.asarray(center, dtype=float)
    d = np.hypot(*(V.positions - c).T)
    sub = Varifold(V.positions[d < radii[0]], V.theta[d < radii[0]], V.weights[d < radii[0]])
    dist = np.hypot(*(sub.positions - c).T)
    var = np.array(parallel_map(lambda r: _ball_variation(sub, c, r), radii))
    mass = np.array([psum(sub.weights[dist < r]) for r in radii])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mass > 0, var / mass, np.inf)
    growth = ratio[1:] / ratio[:-1]
    return RatioProfile(radii, ratio, var, mass, growth)
