"""The functional F(u), level sets and coarea, and Young measures built from
level families of curve systems."""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline
from skimage import measure

from ._util import parallel_map, psum
from .curves import (ClosedCurve, CurveSystem, LevelFamily, _check_p, curvature,
                     level_energy, resample_arclength, trace_distance)
from .fields import Domain
from .measures import VectorParticleMeasure, pair
from .varifolds import Varifold, from_young, singular_ratio, weight_measure, willmore
from .young import (YoungMeasure, add, barycenter, du_measure, from_bv, gy_membership_report,
                    zero_like)


def _pad_edge(v):
    return np.pad(v, 1, mode="edge")


def _gradient(v, h):
    gx, gy = np.gradient(v, h, edge_order=1)
    return gx, gy


def f_energy(u, p):
    """F(u) = int |grad u| (1 + |div(grad u/|grad u|)|^p) dx on the grid.

    Gradients are central differences; the curvature is the central
    difference divergence of the normalized gradient.  Cells with
    |grad u| below the gradient floor contribute nothing.
    """
    _check_p(p)
    gx, gy = _gradient(u.values, u.h)
    g = np.hypot(gx, gy)
    eps = u.gradient_floor(g)
    live = g > eps
    safe = np.where(live, g, 1.0)
    nx = np.where(live, gx / safe, 0.0)
    ny = np.where(live, gy / safe, 0.0)
    kappa = np.gradient(nx, u.h, axis=0, edge_order=1) + np.gradient(ny, u.h, axis=1, edge_order=1)
    dens = np.where(live, g * (1.0 + np.abs(kappa) ** p), 0.0)
    return psum((dens * u.domain_fraction()).ravel()) * u.h * u.h


def hessian_curvature(u):
    """Curvature vectors -kappa grad u/|grad u| of the level lines of u.

    kappa is evaluated with the second-derivative formula
    (u_xx u_y^2 - 2 u_x u_y u_xy + u_yy u_x^2) / |grad u|^3, so it does not
    share a discretization with :func:`f_energy`.  Returns an (nx, ny, 2)
    array, zero below the gradient floor.
    """
    v = _pad_edge(u.values)
    h = u.h
    c = v[1:-1, 1:-1]
    ux = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h)
    uy = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h)
    uxx = (v[2:, 1:-1] - 2 * c + v[:-2, 1:-1]) / (h * h)
    uyy = (v[1:-1, 2:] - 2 * c + v[1:-1, :-2]) / (h * h)
    uxy = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * h * h)
    g = np.hypot(ux, uy)
    live = g > u.gradient_floor(g)
    safe = np.where(live, g, 1.0)
    kappa = (uxx * uy * uy - 2 * ux * uy * uxy + uyy * ux * ux) / safe**3
    H = np.stack([-kappa * ux / safe, -kappa * uy / safe], axis=-1)
    return np.where(live[..., None], H, 0.0)


@dataclass
class SmoothEquality:
    F: float
    W: float
    gap: float
    mass: float
    du_mass: float


def _grid_lookup(u, values):
    """Callable returning ``values[i, j]`` at cell centres."""
    def look(x):
        i = np.rint((x[:, 0] - u.origin[0]) / u.h - 0.5).astype(np.int64)
        j = np.rint((x[:, 1] - u.origin[1]) / u.h - 0.5).astype(np.int64)
        return values[i, j]
    return look


def smooth_equality_check(u, p):
    """F(u) against W(V_{nu_Du}) with curvature taken from u itself."""
    F = f_energy(u, p)
    nu = from_bv(u, polar=False)
    V = from_young(nu, curvature=_grid_lookup(u, hessian_curvature(u)))
    W = willmore(V, p)
    return SmoothEquality(F, W, abs(F - W) / abs(F), V.mass(), du_measure(u, polar=False).total_variation())


# level sets -----------------------------------------------------------------

class OpenLevelError(ValueError):
    pass


#: Newton steps used to move contour vertices onto the bicubic level set.
REFINE_STEPS = 3


def _refine(points, spline, t):
    x = points.copy()
    for _ in range(REFINE_STEPS):
        s = spline.ev(x[:, 0], x[:, 1])
        gx = spline.ev(x[:, 0], x[:, 1], dx=1)
        gy = spline.ev(x[:, 0], x[:, 1], dy=1)
        g2 = gx * gx + gy * gy
        step = np.where(g2 > 0, (s - t) / np.where(g2 > 0, g2, 1.0), 0.0)
        x[:, 0] -= step * gx
        x[:, 1] -= step * gy
    return x


def level_extract(u, t_grid, policy="reject", spacing=None, min_points=8):
    """Level family of the contours {u = t}.

    Contours come from marching squares, are moved onto the level set of a
    bicubic interpolant, and are resampled at uniform arclength with
    spacing at most h/2.  Under ``policy="reject"`` a contour that does not
    close inside the grid raises :class:`OpenLevelError`; ``"drop"``
    discards it.  Levels without contours give empty systems.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("levels must be strictly increasing")
    xs, ys = u.axes()
    spline = RectBivariateSpline(xs, ys, u.values, kx=3, ky=3)
    ds = 0.5 * u.h if spacing is None else float(spacing)

    def one(t):
        curves = []
        for c in measure.find_contours(u.values, t):
            closed = len(c) > 2 and np.allclose(c[0], c[-1])
            if not closed:
                if policy == "reject":
                    raise OpenLevelError(f"open level set at t={t:g} (contour leaves the grid)")
                continue
            if len(c) < min_points:
                continue
            pts = np.column_stack([u.origin[0] + (c[:-1, 0] + 0.5) * u.h,
                                   u.origin[1] + (c[:-1, 1] + 0.5) * u.h])
            pts = _refine(pts, spline, t)
            length = float(np.sum(np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)))
            n = max(16, int(np.ceil(length / ds)))
            curves.append(resample_arclength(pts, n, method="spline"))
        return CurveSystem(curves, validate=False)

    systems = parallel_map(one, t_grid)
    return LevelFamily(t_grid, systems)


@dataclass
class CoareaReport:
    F_direct: float
    F_levels: float
    gap: float


def coarea_check(u, p, t_grid):
    """F(u) directly and as the level integral of W over extracted contours."""
    F = f_energy(u, p)
    fam = level_extract(u, t_grid)
    G = level_energy(fam, p)
    return CoareaReport(F, G, abs(F - G) / abs(F))


# Young measures from level families -------------------------------------

@dataclass
class SistemaResult:
    nu: YoungMeasure
    nu_du: YoungMeasure
    ghost: YoungMeasure
    m: object
    V: Varifold
    G: float
    W: float
    m_mass: float
    du_mass: float
    tag: str = "V0 decomposition nu_Du + nu~"


#: Width of the boundary band, in grid cells, that level traces must avoid.
BAND_CELLS = 2


def _level_contributions(family, jumps, t_lo, t_hi, ds_match):
    """Split every level sample into jump-set and ghost contributions."""
    weights = family.trapezoid_weights()
    jpos = jumps.positions
    lookup = {(float(a), float(b)): k for k, (a, b) in enumerate(jpos)}
    from scipy.spatial import cKDTree
    tree = cKDTree(jpos) if len(jpos) else None
    pos, w, nrm, curv, jidx = [], [], [], [], []
    for om, t, system in zip(weights, family.levels, family.systems):
        if om <= 0:
            continue
        for c in system.curves:
            k = curvature(c)
            tan = c.tangents()
            left = np.column_stack([-tan[:, 1], tan[:, 0]])
            idx = np.full(len(c), -1, dtype=np.int64)
            if tree is not None:
                exact = np.array([lookup.get((float(a), float(b)), -1) for a, b in c.samples])
                idx = exact
                rest = idx < 0
                if np.any(rest):
                    d, kk = tree.query(c.samples[rest], k=1)
                    idx[rest] = np.where(d <= ds_match * c.spacing, kk, -1)
                lo = np.minimum(t_lo[np.maximum(idx, 0)], t_hi[np.maximum(idx, 0)])
                hi = np.maximum(t_lo[np.maximum(idx, 0)], t_hi[np.maximum(idx, 0)])
                idx = np.where((idx >= 0) & (t >= lo) & (t <= hi), idx, -1)
            pos.append(c.samples)
            w.append(np.full(len(c), om * c.multiplicity * c.spacing))
            nrm.append(left)
            curv.append(k)
            jidx.append(idx)
    if not pos:
        z = np.zeros((0, 2))
        return z, np.zeros(0), z, z, np.zeros(0, dtype=np.int64)
    return np.vstack(pos), np.concatenate(w), np.vstack(nrm), np.vstack(curv), np.concatenate(jidx)


def sistema_young_build(u, jumps, family, p, match_frac=0.25):
    """Young measure nu = nu_Du + nu~ of a level family, and V_nu.

    Every level sample carries weight omega_t * theta * ds.  Samples lying
    on the jump set at a level between the traces are shared between Du
    (in proportion |u+ - u-| ds_J to the total covering weight) and the
    excess measure m; all other samples are ghost trace and go entirely to
    m.  m carries symmetric angular atoms (delta_n + delta_-n)/2, and every
    lambda particle carries the curvature of its sample, so that
    W(V_nu) reproduces G(Phi) term by term.
    """
    dom = u.domain if isinstance(u.domain, Domain) else Domain.box(u.bounds)
    band = BAND_CELLS * u.h
    for system in family.systems:
        if len(system) and np.any(dom.boundary_distance(system.samples()) <= band):
            raise ValueError("ipotbordo violated: level traces reach the boundary band")
    nu_du = from_bv(u, jumps, polar=False)
    pos, w, nrm, curv, jidx = _level_contributions(family, jumps, jumps.u_minus, jumps.u_plus, match_frac)
    nj = len(jumps)
    cover = np.zeros(nj)
    on = jidx >= 0
    np.add.at(cover, jidx[on], w[on])
    du_w = np.abs(jumps.gap) * jumps.weights
    share = np.zeros(len(w))
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(cover > 0, np.minimum(du_w / cover, 1.0), 0.0)
    share[on] = frac[jidx[on]]
    m_w = w * (1.0 - share)
    keep = m_w > 1e-15 * max(float(w.max()) if len(w) else 1.0, 1e-300)
    n = nrm[keep]
    ghost = zero_like(nu_du).with_lambda(pos[keep], m_w[keep], np.stack([n, -n], axis=1),
                                         np.full((int(keep.sum()), 2), 0.5), curv[keep], tag="m")
    if jumps.curvature is None:
        raise ValueError("jump set needs curvature for the Young varifold")
    nu = add(nu_du, ghost)
    V = from_young(nu)
    G = level_energy(family, p)
    W = willmore(V, p)
    m_mass = ghost.lam.mass()
    return SistemaResult(nu, nu_du, ghost, ghost.lam, V, G, W, m_mass, psum(du_w))


# the minVu harness ----------------------------------------------------------

@dataclass
class Candidate:
    name: str
    V: Varifold
    W: float
    mass: float
    mass_ok: bool
    ratio_bounded: object = None
    membership: object = None
    valid: object = None


@dataclass
class MinVuReport:
    F_bar: float
    provenance: str
    candidates: list
    min_W: float
    inequality_ok: bool
    gap: float
    tol: float
    notes: list = field(default_factory=list)


def candidate(name, V, p, du_mass, ratio_centers=(), radii=(0.2, 0.1, 0.05, 0.025), membership=None):
    """Energy, mass inequality and singular-ratio diagnostics of one V."""
    W = willmore(V, p)
    mass = V.mass()
    bounded = None
    if len(ratio_centers):
        bounded = not any(singular_ratio(V, c, radii).singular() for c in ratio_centers)
    valid = bounded if bounded is not None else True
    if membership is not None:
        valid = valid and membership.ok
    return Candidate(name, V, W, mass, bool(mass >= du_mass - 1e-6), bounded, membership, valid)


def minvu_gap(F_bar, candidates, provenance="", tol_rel=1e-6):
    """F_bar + tol >= min over candidates of W(V)."""
    if not candidates:
        raise ValueError("no candidates")
    Ws = [c.W for c in candidates]
    mn = float(min(Ws))
    tol = tol_rel * max(1.0, abs(F_bar))
    return MinVuReport(F_bar, provenance, list(candidates), mn, bool(F_bar + tol >= mn),
                       (F_bar - mn) / abs(F_bar), tol)


def mass_inequality(V, u, jumps=None, slack=1e-6):
    """mu_V(Omega) >= |Du|(Omega) - slack."""
    du = du_measure(u, jumps, polar=False if jumps is not None else None).total_variation()
    return V.mass() >= du - slack, V.mass(), du
