"""Generalized Young measures: triplets, pairing, barycenters, and limits."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._util import parallel_map, psum
from .fields import Domain, JumpSet, RadialProfile, ScalarField, grid_gradient, polar_edges, polar_mesh
from .measures import OVERFLOW, ParticleMeasure, VectorParticleMeasure, _canonical_order, pair


def _atoms(a, n):
    a = np.asarray(a, dtype=float)
    width = a.shape[1] if a.ndim == 3 else (1 if a.size else 0)
    return a.reshape(n, width, 2)


def _probs(a, n):
    a = np.asarray(a, dtype=float)
    width = a.shape[1] if a.ndim == 2 else (1 if a.size else 0)
    return a.reshape(n, width)


class YoungMeasure:
    """Discrete triplet (nu_x, lambda, nu_x^inf).

    Parameters
    ----------
    centers : (C, 2) cell nodes; areas : (C,) cell areas.
    z : (C, A, 2) oscillation atoms; p : (C, A) their probabilities
        (padding atoms carry probability 0).
    lam : ParticleMeasure, the concentration measure.
    d : (L, B, 2) unit angular atoms; q : (L, B) probabilities, given in the
        order of ``lam_positions``/``lam_weights`` as passed in.
    domain : Domain, used for the boundary condition on lambda.
    cell : typical cell size, the width unit of the boundary band.
    lam_curvature : optional (L, 2) curvature vectors carried by the
        concentration particles (used when building Young varifolds).
    """

    def __init__(self, centers, areas, z, p, lam_positions, lam_weights, d, q, domain, cell,
                 lam_curvature=None, tag=""):
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        n = len(centers)
        z = _atoms(z, n)
        p = _probs(p, n)
        if z.shape[1] != p.shape[1]:
            raise ValueError("atom arrays differ in width")
        if n and np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("cell probabilities must sum to 1")
        if np.any(p < 0):
            raise ValueError("negative probability")
        lam = ParticleMeasure(lam_positions, lam_weights)
        L = len(lam)
        d = _atoms(d, L)
        q = _probs(q, L)
        if L and d.shape[1]:
            if np.max(np.abs(q.sum(axis=1) - 1.0)) > 1e-12:
                raise ValueError("angular probabilities must sum to 1")
            used = q > 0
            if np.any(np.abs(np.hypot(d[..., 0], d[..., 1])[used] - 1.0) > 1e-9):
                raise ValueError("angular atoms must be unit vectors")
        order = _canonical_order(centers)
        self.centers = centers[order]
        self.areas = np.asarray(areas, dtype=float).reshape(n)[order]
        self.z = z[order]
        self.p = p[order]
        self.lam = lam
        self.d = d[lam.order]
        self.q = q[lam.order]
        self.lam_curvature = None
        if lam_curvature is not None:
            self.lam_curvature = np.asarray(lam_curvature, dtype=float).reshape(L, 2)[lam.order]
        self.domain = domain
        self.cell = float(cell)
        self.tag = tag
        for a in (self.centers, self.areas, self.z, self.p, self.d, self.q):
            a.setflags(write=False)

    def __repr__(self):
        return (f"YoungMeasure(cells={len(self.centers)}, lambda_mass={self.lam.mass():.6g}, "
                f"tag={self.tag!r})")

    @property
    def n_cells(self):
        return len(self.centers)

    def lambda_mass(self):
        return self.lam.mass()

    def first_moment(self):
        """sum_cells area sum_j p_j |z_j| + mass(lambda)."""
        zn = np.hypot(self.z[..., 0], self.z[..., 1])
        return psum(self.areas * np.sum(self.p * zn, axis=1)) + self.lam.mass()

    def oscillation_is_trivial(self, tol=0.0):
        """True when every cell is delta_0."""
        zn = np.hypot(self.z[..., 0], self.z[..., 1])
        return bool(np.all((self.p == 0) | (zn <= tol)))

    def with_lambda(self, positions, weights, d, q, lam_curvature=None, tag=None):
        return YoungMeasure(self.centers, self.areas, self.z, self.p, positions, weights, d, q,
                            self.domain, self.cell, lam_curvature, self.tag if tag is None else tag)


@dataclass
class GeneratorSequence:
    """Sequence h -> u_h of fields, with an optional declared limit."""

    builder: object
    declared_limit: object = None
    name: str = ""
    schedule: tuple = ()

    def __call__(self, h):
        u = self.builder(h)
        if not np.all(np.isfinite(u.values)):
            raise ValueError("generator produced non-finite values")
        return u


def _eval_atoms(fn, x, z, p):
    """sum_j p_j fn(x, z_j) per row, evaluated only on atoms with p_j > 0."""
    n, a = p.shape
    out = np.zeros((n, a))
    used = p > 0
    if np.any(used):
        xr = np.repeat(x[:, None, :], a, axis=1)[used]
        vals = np.asarray(fn(xr, z[used]), dtype=float)
        out[used] = vals
    return np.sum(p * out, axis=1)


def pairing(nu, f):
    """<<nu, f>> = int <nu_x, f(x, .)> dx + int <nu_x^inf, f_inf(x, .)> dlambda."""
    osc = psum(nu.areas * _eval_atoms(f.f, nu.centers, nu.z, nu.p)) if nu.n_cells else 0.0
    if nu.lam.mass() == 0:
        return osc
    if f.superlinear:
        return OVERFLOW
    if f.f_inf is None:
        raise ValueError("missing f_inf while lambda has mass")
    if nu.q.shape[1] == 0:
        raise ValueError("no angular atoms on a lambda with mass")
    conc = psum(nu.lam.weights * _eval_atoms(f.f_inf, nu.lam.positions, nu.d, nu.q))
    return osc + conc


def barycenter(nu):
    """Bar_nu: first moments of the cells plus angular means times lambda."""
    ac = nu.areas[:, None] * np.einsum("ca,cak->ck", nu.p, nu.z)
    parts = [VectorParticleMeasure(nu.centers, ac)]
    if len(nu.lam):
        sing = nu.lam.weights[:, None] * np.einsum("lb,lbk->lk", nu.q, nu.d)
        parts.append(VectorParticleMeasure(nu.lam.positions, sing))
    out = parts[0]
    for p in parts[1:]:
        out = out.concat(p)
    return out


def _domain_of(u):
    if isinstance(u.domain, Domain):
        return u.domain
    return Domain.box(u.bounds)


def _check_jumps_inside(u, jumps):
    x0, x1, y0, y1 = u.bounds
    for poly in jumps.polylines:
        if np.any((poly[:, 0] < x0) | (poly[:, 0] > x1) | (poly[:, 1] < y0) | (poly[:, 1] > y1)):
            raise ValueError("jump polyline leaving the grid")


def _grid_cells(u, jumps):
    grad = grid_gradient(u, jumps.segments() if jumps is not None else None)
    frac = u.domain_fraction()
    keep = frac > 0
    centers = u.centers()[keep]
    areas = frac[keep] * u.h * u.h
    return centers, areas, grad[keep]


def _jump_particles(jumps):
    gap = jumps.gap
    w = np.abs(gap) * jumps.weights
    d = np.sign(gap)[:, None] * jumps.normals
    keep = w > 0
    return jumps.positions[keep], w[keep], d[keep]


#: Default radial and angular resolution of polar meshes.
POLAR_DR = 1.0 / 64
POLAR_MIN_SUB = 1


def polar_cells(profile, dr=POLAR_DR, ds=None, min_sub=POLAR_MIN_SUB):
    """Polar mesh aligned with the breakpoints of a radial profile."""
    edges = polar_edges(profile.breaks, dr, min_sub)
    return polar_mesh(edges, dr if ds is None else ds)


def _radial_parts(profile, dr=POLAR_DR, ds=None):
    mesh = polar_cells(profile, dr, ds)
    b, s, _ = profile.arrays()
    piece = np.clip(np.searchsorted(b, mesh.r_node, side="right") - 1, 0, len(s) - 1)
    er = np.column_stack([np.cos(mesh.theta), np.sin(mesh.theta)])
    grad = s[piece][:, None] * er
    pos, w, d = [], [], []
    ds_j = dr if ds is None else ds
    for r, inner, outer in profile.jumps():
        m = 4 * int(np.ceil(max(16.0, 2 * np.pi * r / ds_j) / 4))
        th = (np.arange(m) + 0.5) * 2 * np.pi / m
        e = np.column_stack([np.cos(th), np.sin(th)])
        pos.append(r * e)
        w.append(np.full(m, abs(outer - inner) * 2 * np.pi * r / m))
        d.append(np.sign(outer - inner) * e)
    if pos:
        pos, w, d = np.vstack(pos), np.concatenate(w), np.vstack(d)
    else:
        pos, w, d = np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2))
    return mesh, grad, pos, w, d


def from_bv(u, jumps=None, polar=None, dr=POLAR_DR, ds=None):
    """nu_Du: delta at the gradient per cell, |D^s u| with the jump normal.

    On a grid, gradients are central differences, one-sided next to cells
    separated by a declared jump polyline.  A field carrying an exact
    radial profile is discretized on a breakpoint-aligned polar mesh
    instead (``polar=False`` forces the grid path).
    """
    if polar is None:
        polar = u.radial is not None and jumps is None
    if polar:
        prof = u.radial
        mesh, grad, pos, w, d = _radial_parts(prof, dr, ds)
        return YoungMeasure(mesh.centers, mesh.areas, grad[:, None, :], np.ones((len(grad), 1)),
                            pos, w, d[:, None, :], np.ones((len(w), 1)),
                            Domain.disk(prof.radius), dr, tag="nu_Du")
    if jumps is not None:
        _check_jumps_inside(u, jumps)
    centers, areas, grad = _grid_cells(u, jumps)
    if jumps is not None and len(jumps):
        pos, w, d = _jump_particles(jumps)
        curv = None
        if jumps.curvature is not None:
            curv = jumps.curvature[np.abs(jumps.gap) * jumps.weights > 0]
    else:
        pos, w, d, curv = np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)), None
    return YoungMeasure(centers, areas, grad[:, None, :], np.ones((len(grad), 1)),
                        pos, w, d[:, None, :], np.ones((len(w), 1)), _domain_of(u), u.h,
                        lam_curvature=curv, tag="nu_Du")


def du_measure(u, jumps=None, polar=None, dr=POLAR_DR, ds=None):
    """Du as a vector particle measure, built straight from the field."""
    if polar is None:
        polar = u.radial is not None and jumps is None
    if polar:
        mesh, grad, pos, w, d = _radial_parts(u.radial, dr, ds)
        ac = VectorParticleMeasure(mesh.centers, mesh.areas[:, None] * grad)
        return ac.concat(VectorParticleMeasure(pos, w[:, None] * d))
    centers, areas, grad = _grid_cells(u, jumps)
    out = VectorParticleMeasure(centers, areas[:, None] * grad)
    if jumps is not None and len(jumps):
        out = out.concat(VectorParticleMeasure(jumps.positions, (jumps.gap * jumps.weights)[:, None] * jumps.normals))
    return out


def total_variation_du(u, jumps=None, polar=None, dr=POLAR_DR):
    """|Du|(Omega) of the discretized field."""
    return du_measure(u, jumps, polar, dr).total_variation()


def add(a, b):
    """nu_Du + nu~ for an addend b whose cells are all delta_0.

    The sum keeps the oscillation part of ``a`` and concatenates the
    concentration parts.  Pairings add exactly for integrands with
    f(x, 0) = 0, which is the only case this sum is used for.
    """
    if not b.oscillation_is_trivial():
        raise ValueError("only GY(0)-shaped addends supported")
    if a.n_cells and b.n_cells and a.n_cells != b.n_cells:
        raise ValueError("addends live on different grids")
    width = max(a.d.shape[1], b.d.shape[1], 1)

    def padded(nu):
        d = np.zeros((len(nu.lam), width, 2))
        q = np.zeros((len(nu.lam), width))
        d[:, :nu.d.shape[1]] = nu.d
        q[:, :nu.q.shape[1]] = nu.q
        if nu.d.shape[1] == 0:
            d[:, 0] = (1.0, 0.0)
            q[:, 0] = 1.0
        return d, q

    da, qa = padded(a)
    db, qb = padded(b)
    curv = None
    if a.lam_curvature is not None or b.lam_curvature is not None:
        ca = a.lam_curvature if a.lam_curvature is not None else np.full((len(a.lam), 2), np.nan)
        cb = b.lam_curvature if b.lam_curvature is not None else np.full((len(b.lam), 2), np.nan)
        curv = np.vstack([ca, cb])
    return a.with_lambda(
        np.vstack([a.lam.positions, b.lam.positions]),
        np.concatenate([a.lam.weights, b.lam.weights]),
        np.concatenate([da, db]), np.concatenate([qa, qb]), curv,
        tag=(a.tag + "+" + b.tag) if b.tag else a.tag,
    )


def zero_like(nu):
    """The neutral triplet (delta_0, lambda = 0) on the grid of ``nu``."""
    n = nu.n_cells
    return YoungMeasure(nu.centers, nu.areas, np.zeros((n, 1, 2)), np.ones((n, 1)),
                        np.zeros((0, 2)), np.zeros(0), np.zeros((0, 1, 2)), np.zeros((0, 1)),
                        nu.domain, nu.cell, tag="")


def witness_fields():
    """Ten smooth bounded vector fields used for barycenter residuals."""
    def f(fx, fy):
        return lambda x: np.column_stack([fx(x[:, 0], x[:, 1]), fy(x[:, 0], x[:, 1])])
    one = np.ones_like
    zero = np.zeros_like
    return [
        f(lambda x, y: one(x), lambda x, y: zero(x)),
        f(lambda x, y: zero(x), lambda x, y: one(x)),
        f(lambda x, y: np.sin(x), lambda x, y: np.cos(y)),
        f(lambda x, y: np.exp(-(x * x + y * y)), lambda x, y: x * np.exp(-(x * x + y * y))),
        f(lambda x, y: np.cos(2 * x + y), lambda x, y: np.sin(x - 2 * y)),
        f(lambda x, y: 1.0 / (1.0 + x * x + y * y), lambda x, y: y / (1.0 + x * x + y * y)),
        f(lambda x, y: np.tanh(x * y), lambda x, y: np.cos(3 * y)),
        f(lambda x, y: np.sin(3 * x) * np.cos(y), lambda x, y: np.exp(-((x - 0.5) ** 2 + y * y))),
        f(lambda x, y: x / (1.0 + x * x), lambda x, y: -y / (1.0 + y * y)),
        f(lambda x, y: np.cos(x + y) ** 2, lambda x, y: np.sin(x * 0.7 + 0.3)),
    ]


@dataclass
class MembershipReport:
    moment: float
    moment_finite: bool
    boundary_mass: float
    boundary_ok: bool
    barycenter_residual: float
    barycenter_ok: bool
    residuals: list = field(default_factory=list)

    @property
    def ok(self):
        return self.moment_finite and self.boundary_ok and self.barycenter_ok


#: Relative tolerance of the boundary-band and barycenter checks.
MEMBERSHIP_TOL = 1e-6
#: Width of the boundary band in cells.
BAND_CELLS = 2


def gy_membership_report(nu, u, jumps=None, tol=MEMBERSHIP_TOL, du=None):
    """Finite first moment, lambda off the boundary, and Bar_nu = Du.

    The boundary test measures lambda within ``BAND_CELLS`` cells of the
    domain boundary relative to the total lambda mass.  The barycenter test
    compares pairings against ten witness fields, relative to max(1, |Du|).
    """
    mom = nu.first_moment()
    finite = bool(np.isfinite(mom))
    lam = nu.lam
    total = lam.mass()
    if len(lam):
        near = nu.domain.boundary_distance(lam.positions) <= BAND_CELLS * nu.cell
        band = psum(lam.weights[near])
    else:
        band = 0.0
    b_ok = bool(band <= tol * max(total, 1e-300)) if total > 0 else True
    if du is None:
        du = du_measure(u, jumps)
    bar = barycenter(nu)
    scale = max(1.0, du.total_variation())
    res = [abs(pair(bar, g) - pair(du, g)) / scale for g in witness_fields()]
    r = max(res)
    return MembershipReport(mom, finite, band, b_ok, r, bool(r <= tol), res)


# canonical examples --------------------------------------------------------

KINDS = ("oscillation", "concentration", "diffuse")
_ALIASES = {"osc": "oscillation", "conc": "concentration", "concdiff": "diffuse",
            "oscillation": "oscillation", "concentration": "concentration", "diffuse": "diffuse"}


def kind_name(kind):
    try:
        return _ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown example kind {kind!r}") from None


def canonical_profile(kind, h):
    """Exact radial profile of u_h for the three model sequences."""
    kind = kind_name(kind)
    h = int(h)
    if h < 2:
        raise ValueError("h must be at least 2")
    if kind == "oscillation":
        n = 2 ** h
        breaks = np.arange(n + 1) / n
        slope = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        left = np.where(np.arange(n) % 2 == 0, 0.0, 1.0 / n)
        return RadialProfile(tuple(breaks), tuple(slope), tuple(left))
    if kind == "concentration":
        pieces = [(1.0 - 1.0 / h, 1.0, 1.0, -float(h)), (1.0, 1.0 + 1.0 / h, 0.0, float(h))]
        return RadialProfile.from_pieces(pieces, 2.0)
    pieces = []
    for k in range(h):
        a = k / h
        m = a + 1.0 / (2 * h * h)
        pieces.append((a, m, 0.0, float(h)))
        pieces.append((m, a + 1.0 / (h * h), 1.0 / (2 * h), -float(h)))
    return RadialProfile.from_pieces(pieces, 1.0)


def canonical_domain(kind):
    return Domain.disk(2.0 if kind_name(kind) == "concentration" else 1.0)


def radial_curvature(x):
    """Curvature vector -x/|x|^2 of the circles |x| = const."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    r2 = np.sum(x * x, axis=1)
    return -x / r2[:, None]


#: Particles on the unit circle in the concentration limit.
CIRCLE_PARTICLES = 4096


def canonical_limit(kind, dr=POLAR_DR, ds=None, n_circle=CIRCLE_PARTICLES):
    """Closed-form limit triplet of the model sequences, discretized.

    oscillation: nu_x = (delta_{e_r} + delta_{-e_r})/2, lambda = 0;
    concentration: nu_x = delta_0, lambda = 4 H^1 on the unit circle with
    symmetric radial angular atoms;
    diffuse: nu_x = delta_0, lambda = Lebesgue on the unit disk, symmetric
    radial angular atoms.
    """
    kind = kind_name(kind)
    dom = canonical_domain(kind)
    R = dom.radius
    if kind == "concentration":
        prof = RadialProfile((0.0, 1.0, R), (0.0, 0.0), (0.0, 0.0))
    else:
        prof = RadialProfile((0.0, R), (0.0,), (0.0,))
    mesh = polar_cells(prof, dr, ds)
    n = len(mesh.areas)
    er = np.column_stack([np.cos(mesh.theta), np.sin(mesh.theta)])
    if kind == "oscillation":
        z = np.stack([er, -er], axis=1)
        p = np.full((n, 2), 0.5)
        return YoungMeasure(mesh.centers, mesh.areas, z, p, np.zeros((0, 2)), np.zeros(0),
                            np.zeros((0, 0, 2)), np.zeros((0, 0)), dom, dr, tag="limit")
    z = np.zeros((n, 1, 2))
    p = np.ones((n, 1))
    if kind == "concentration":
        th = 2 * np.pi * np.arange(n_circle) / n_circle
        pos = np.column_stack([np.cos(th), np.sin(th)])
        w = np.full(n_circle, 4.0 * 2 * np.pi / n_circle)
        e = pos
    else:
        pos, w, e = mesh.centers, mesh.areas, er
    d = np.stack([e, -e], axis=1)
    q = np.full((len(w), 2), 0.5)
    return YoungMeasure(mesh.centers, mesh.areas, z, p, pos, w, d, q, dom, dr, tag="limit")


def canonical_field(kind, h, n=256):
    """Grid sample of u_h on the bounding box of its domain, with the exact profile attached."""
    prof = canonical_profile(kind, h)
    dom = canonical_domain(kind)

    def fn(pts):
        return prof(np.hypot(pts[:, 0], pts[:, 1]))
    return ScalarField.from_function(fn, n, dom.bounds, domain=dom, radial=prof)


def canonical_example(kind, h, n=256):
    """(u_h on a grid, closed-form limit triplet) for a model sequence."""
    return canonical_field(kind, h, n), canonical_limit(kind)


#: Default identification schedules.
SCHEDULES = {
    "oscillation": (4, 5, 6, 7),
    "concentration": (8, 16, 32, 64),
    "diffuse": (8, 16, 32, 64),
}


def canonical_sequence(kind, n=64):
    kind = kind_name(kind)
    return GeneratorSequence(lambda h: canonical_field(kind, h, n), canonical_limit(kind), kind,
                             SCHEDULES[kind])


# identification -------------------------------------------------------------

#: Radial scales s of the bounded tests 1/(1 + |z|^2/s^2).
RADIAL_SCALES = (0.25, 0.5, 1.0, 2.0, 4.0)
#: Angular orders of the homogeneous tests |z| cos/sin(k theta).
HOMOGENEOUS_ORDERS = (1, 2, 3, 4)


#: Atoms further out than this are treated as escaped to infinity.
RHO_MAX = 10 * max(RADIAL_SCALES)
#: Oscillation weights below this are snapped to delta_0.
W_MIN = 1e-3


@dataclass(frozen=True)
class Battery:
    bounded: tuple
    homogeneous: tuple
    names: tuple


def default_battery():
    """Ten bounded and nine positively homogeneous test functions of z."""
    def radial(s):
        return lambda z: 1.0 / (1.0 + (z[:, 0] ** 2 + z[:, 1] ** 2) / (s * s))

    def g(z):
        r2 = z[:, 0] ** 2 + z[:, 1] ** 2
        return r2 / (1.0 + r2) ** 2

    def ang(z):
        return np.arctan2(z[:, 1], z[:, 0])

    bounded = [radial(s) for s in RADIAL_SCALES]
    names = [f"radial s={s:g}" for s in RADIAL_SCALES]
    bounded.append(g)
    names.append("g")
    for k in (1, 2):
        bounded.append(lambda z, k=k: g(z) * np.cos(k * ang(z)))
        bounded.append(lambda z, k=k: g(z) * np.sin(k * ang(z)))
        names += [f"g cos{k}", f"g sin{k}"]
    hom = [lambda z: np.hypot(z[:, 0], z[:, 1])]
    names.append("|z|")
    for k in HOMOGENEOUS_ORDERS:
        hom.append(lambda z, k=k: np.hypot(z[:, 0], z[:, 1]) * np.cos(k * ang(z)))
        hom.append(lambda z, k=k: np.hypot(z[:, 0], z[:, 1]) * np.sin(k * ang(z)))
        names += [f"|z| cos{k}", f"|z| sin{k}"]
    return Battery(tuple(bounded), tuple(hom), tuple(names))


@dataclass
class AnalysisGrid:
    """Cubic B-spline partition of unity with nodes at cell centres."""

    origin: tuple
    cell: float
    nx: int
    ny: int

    @classmethod
    def covering(cls, bounds, cell):
        x0, x1, y0, y1 = bounds
        pad = 2 * cell
        nx = int(np.ceil((x1 - x0 + 2 * pad) / cell))
        ny = int(np.ceil((y1 - y0 + 2 * pad) / cell))
        return cls((x0 - pad, y0 - pad), float(cell), nx, ny)

    def nodes(self):
        xs = self.origin[0] + (np.arange(self.nx) + 0.5) * self.cell
        ys = self.origin[1] + (np.arange(self.ny) + 0.5) * self.cell
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx, gy], axis=-1)

    def scatter(self, pos, vals):
        return kernels.bspline_scatter(pos, vals, self.origin, self.cell, self.nx, self.ny)


def _moments(nu, battery, grid):
    """Per-node bounded, homogeneous and |Du| moments of one Young measure."""
    x, a = nu.centers, nu.areas
    cols = []
    for fn in battery.bounded:
        cols.append(a * _eval_atoms(lambda xx, zz, fn=fn: fn(zz), x, nu.z, nu.p))
    cols.append(a)
    bounded = grid.scatter(x, np.column_stack(cols))
    hom_c = np.column_stack([a * _eval_atoms(lambda xx, zz, fn=fn: fn(zz), x, nu.z, nu.p)
                             for fn in battery.homogeneous])
    hom = grid.scatter(x, hom_c)
    if len(nu.lam):
        w = nu.lam.weights
        hom_l = np.column_stack([w * _eval_atoms(lambda xx, dd, fn=fn: fn(dd), nu.lam.positions, nu.d, nu.q)
                                 for fn in battery.homogeneous])
        hom = hom + grid.scatter(nu.lam.positions, hom_l)
    return bounded[..., :-1], bounded[..., -1], hom


#: Largest ratio of successive differences for which Aitken is trusted.
AITKEN_RATIO = 0.75


def extrapolate(values, rel_tol=1e-3):
    """Aitken extrapolation of the last three values when they contract.

    Returns (limit, converged).  Works elementwise on a (n_h, ...) array.
    """
    v = np.asarray(values, dtype=float)
    last = v[-1]
    if len(v) < 3:
        return last, np.ones(last.shape, dtype=bool)
    a, b, c = v[-3], v[-2], v[-1]
    d1, d2 = b - a, c - b
    scale = np.maximum(np.max(np.abs(v), axis=0), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        contracting = (np.abs(d2) <= AITKEN_RATIO * np.abs(d1)) & (d1 * d2 > 0)
        denom = d2 - d1
        ait = c - d2 * d2 / denom
    use = contracting & np.isfinite(ait) & (np.abs(denom) > 1e-14 * scale)
    lim = np.where(use, ait, last)
    small = np.abs(d2) <= rel_tol * scale
    converged = small | (np.abs(d2) <= np.abs(d1))
    return lim, converged


def _fit_radial(vals, scales, stages=3, n=241):
    """Fit w0 and rho in v_s = w0 + (1 - w0) / (1 + rho^2 / s^2), per row.

    ``vals`` is (m, n_scales).  For a trial rho the weight w0 solves a
    one-dimensional least-squares problem in closed form; log(rho) is then
    located by successively refined scans.
    """
    s = np.asarray(scales, dtype=float)
    v = np.atleast_2d(np.asarray(vals, dtype=float))
    m = len(v)

    def solve(lr):
        # lr: (m, k) trial log-radii
        c = 1.0 / (1.0 + np.exp(2 * lr)[..., None] / s**2)
        a = 1.0 - c
        den = np.sum(a * a, axis=-1)
        num = np.sum(a * (v[:, None, :] - c), axis=-1)
        w0 = np.clip(np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0), 0.0, 1.0)
        r = v[:, None, :] - (w0[..., None] + (1 - w0[..., None]) * c)
        return np.sum(r * r, axis=-1), w0

    lo, hi = np.log(1e-6), np.log(1e6)
    centre = np.full(m, 0.5 * (lo + hi))
    half = np.full(m, 0.5 * (hi - lo))
    for _ in range(stages):
        t = np.linspace(-1.0, 1.0, n)
        lr = centre[:, None] + half[:, None] * t
        err, _ = solve(lr)
        k = np.argmin(err, axis=1)
        centre = lr[np.arange(m), k]
        half = half * 2.0 / (n - 1)
    err, w0 = solve(centre[:, None])
    return w0[:, 0], np.exp(centre)


def _axis_fit(c1, s1, c2, s2, base):
    """Antipodal pair a delta_e + (1 - a) delta_{-e} from k = 1, 2 moments."""
    theta = 0.5 * np.arctan2(s2, c2)
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        asym = np.where(base > 0, (c1 * e[..., 0] + s1 * e[..., 1]) / np.where(base > 0, base, 1.0), 0.0)
    a = np.clip(0.5 * (1.0 + asym), 0.0, 1.0)
    return e, a


@dataclass
class IdentificationResult:
    estimate: YoungMeasure
    table: list
    flags: dict
    node_lambda: np.ndarray
    node_area: np.ndarray
    node_full: float
    nodes: np.ndarray
    mass_du: float
    lambda_mass: float
    schedule: tuple


def identify_limit(seq, battery=None, h_schedule=None, cell=1.0 / 16, dr=None, tol=1e-3):
    """Estimate the limit triplet of a generating sequence.

    For each h the Young measure nu_{Du_h} is paired with f = Phi_n(x)
    phi(z), where Phi_n is a cubic B-spline partition of unity with spacing
    ``cell``.  Bounded tests fix nu_x (a delta_0 weight plus an antipodal
    pair), homogeneous tests give |Du_h| localized on each bump, and lambda
    is the limit of that mass minus the absolutely continuous prediction.
    Every pairing is extrapolated over the schedule; tests whose values do
    not settle are flagged.
    """
    battery = default_battery() if battery is None else battery
    if len(battery.bounded) < 8 or len(battery.homogeneous) < 8:
        raise ValueError("battery needs at least 8 bounded and 8 homogeneous tests")
    sched = tuple(seq.schedule if h_schedule is None else h_schedule)
    if np.any(np.diff(sched) <= 0):
        raise ValueError("h schedule must increase")
    dr = cell / 4 if dr is None else dr
    probe = seq(sched[0])
    dom = probe.domain if isinstance(probe.domain, Domain) else Domain.box(probe.bounds)
    grid = AnalysisGrid.covering(dom.bounds, cell)

    def one(h):
        u = seq(h)
        nu = from_bv(u, dr=dr)
        b, area, hom = _moments(nu, battery, grid)
        return b, area, hom, du_measure(u, dr=dr).total_variation()

    runs = parallel_map(one, sched)
    B = np.stack([r[0] for r in runs])
    Hm = np.stack([r[2] for r in runs])
    area = runs[-1][1]
    masses = [r[3] for r in runs]
    b_lim, b_conv = extrapolate(B, tol)
    h_lim, h_conv = extrapolate(Hm, tol)

    names = battery.names
    nb = len(battery.bounded)
    table = []
    flags = {}
    for i, name in enumerate(names):
        series = B[..., i] if i < nb else Hm[..., i - nb]
        tot = [psum(s.ravel()) for s in series]
        d = np.diff(tot)
        scale = max(1.0, max(abs(t) for t in tot))
        settled = len(d) < 2 or abs(d[-1]) <= tol * scale or abs(d[-1]) <= abs(d[-2])
        flags[name] = not settled
        table.append({"test": name, "values": tot, "converged": bool(settled)})

    nodes = grid.nodes()
    full = cell * cell
    nS = len(RADIAL_SCALES)
    live = area > 1e-12 * full
    A = area[live]
    v = b_lim[live] / A[:, None]
    w0, rho = _fit_radial(v[:, :nS], RADIAL_SCALES)
    e, a = _axis_fit(v[:, nS + 1], v[:, nS + 2], v[:, nS + 3], v[:, nS + 4], v[:, nS])
    # an atom beyond the largest scale, or a negligible weight, is not
    # resolved by bounded tests: that mass has escaped to lambda
    trivial = ((1 - w0) * rho < 1e-12) | (rho > RHO_MAX) | (1 - w0 < W_MIN)
    w0 = np.where(trivial, 1.0, w0)
    rho = np.where(trivial, 0.0, rho)
    z = np.stack([np.zeros_like(e), rho[:, None] * e, -rho[:, None] * e], axis=1)
    p = np.column_stack([w0, (1 - w0) * a, (1 - w0) * (1 - a)])
    p = p / p.sum(axis=1, keepdims=True)
    hm = h_lim[live]
    ac = (1 - w0) * rho * A
    lam = np.maximum(hm[:, 0] - ac, 0.0)
    node_lam = np.zeros(area.shape)
    node_lam[live] = lam
    th = np.arctan2(e[:, 1], e[:, 0])

    def ac_mom(k):
        sgn = a + (1 - a) * (-1) ** k
        return (ac * sgn)[:, None] * np.column_stack([np.cos(k * th), np.sin(k * th)])

    m1 = hm[:, 1:3] - ac_mom(1)
    m2 = hm[:, 3:5] - ac_mom(2)
    de, da = _axis_fit(m1[:, 0], m1[:, 1], m2[:, 0], m2[:, 1], lam)
    pos = lam > 0
    est = YoungMeasure(nodes[live], A, z, p, nodes[live][pos], lam[pos],
                       np.stack([de[pos], -de[pos]], axis=1), np.column_stack([da[pos], 1 - da[pos]]),
                       dom, cell, tag="identified")
    flags["converged_nodes"] = float(np.mean(b_conv)) if b_conv.size else 1.0
    flags["converged_nodes_hom"] = float(np.mean(h_conv)) if h_conv.size else 1.0
    return IdentificationResult(est, table, flags, node_lam, area, full, nodes, masses[-1],
                                est.lam.mass(), sched)
