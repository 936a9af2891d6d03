"""Planar scenes: parametric geometry for the counterexamples, smooth radial
fields, and the scene registry used by the command line.

The counterexample geometries are reconstructions.  Their parameters are
stored on every scene and can be changed by keyword.

Drop
    A closed C^1 loop with a cusp-shaped tip.  In its local frame (tip at
    the origin, axis +x, radius rho) it runs clockwise along the circle of
    centre (0, -rho) for 60 degrees, counter-clockwise along the circle of
    centre (sqrt(3) rho, 0) for 300 degrees and clockwise along the circle
    of centre (0, rho) for 60 degrees.  It leaves the tip heading +x and
    returns heading -x, has length 7 pi rho / 3 and curvature 1/rho.

cusp
    Two drops with tips at (+-L/2, 0) opening outwards, joined by the
    segment between the tips.  The limit curve runs along the segment,
    around one drop, back along the segment and around the other drop, so
    the segment is a ghost traversed twice.

cross
    Four drops with tips at distance a from the origin on the axes.  The
    limit curves join neighbouring tips by quarter circles of radius a,
    traversed twice.  The competing varifold replaces the quarter circles
    by the doubled straight segments [-a, a] on both axes, which carry no
    curvature.

triple
    Three doubled circular arcs (radius 1, sweep 30 degrees) leave the
    origin at 120 degrees from each other; a drop is attached at the end
    of each arc along its end tangent.

trisegment
    Three unit segments from the origin at angles 0, 90 and 225 degrees.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .curves import (ClosedCurve, CurveSystem, LevelFamily, curvature, equalize_chords,
                     level_energy, winding_index, willmore_energy)
from .fields import Domain, JumpSet, ScalarField, grid_gradient
from .measures import (OVERFLOW, ParticleMeasure, VectorParticleMeasure, lsc_probe,
                       power_integrand, sqrt1_integrand, abs_integrand)
from .relaxation import (candidate, coarea_check, f_energy, hessian_curvature, minvu_gap,
                         sistema_young_build, smooth_equality_check, _grid_lookup)
from .report import Row, check_row, info_row, rel_row
from .varifolds import (Varifold, curvature_measures, from_curve_system, from_young, line_angle,
                        singular_ratio, willmore)
from .young import (canonical_limit, canonical_sequence, from_bv, gy_membership_report,
                    radial_curvature, kind_name)

PAPER = "[PAPER]"
DERIVED = "[DERIVED]"
RECON = "[DERIVED: reconstructed geometry]"

#: Radii at which singular ratios are profiled.
RATIO_RADII = (0.2, 0.1, 0.05, 0.025)


# paths ----------------------------------------------------------------------

@dataclass(frozen=True)
class Line:
    a: tuple
    b: tuple
    label: str = "ghost"

    @property
    def length(self):
        return float(np.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]))

    def point(self, s):
        a, b = np.asarray(self.a), np.asarray(self.b)
        return a + np.outer(s / self.length, b - a)

    def tangent(self, s):
        d = (np.asarray(self.b) - np.asarray(self.a)) / self.length
        return np.tile(d, (len(s), 1))


@dataclass(frozen=True)
class Arc:
    center: tuple
    radius: float
    start: float
    sweep: float
    label: str = "boundary"

    @property
    def length(self):
        return abs(self.sweep) * self.radius

    def _angle(self, s):
        return self.start + np.sign(self.sweep) * s / self.radius

    def point(self, s):
        a = self._angle(s)
        return np.asarray(self.center) + self.radius * np.column_stack([np.cos(a), np.sin(a)])

    def tangent(self, s):
        a = self._angle(s)
        return np.sign(self.sweep) * np.column_stack([-np.sin(a), np.cos(a)])

    def end(self):
        return self.point(np.array([self.length]))[0], self.tangent(np.array([self.length]))[0]


class Path:
    """Closed arclength-parametrized chain of lines and arcs."""

    def __init__(self, pieces):
        self.pieces = list(pieces)
        lens = np.array([p.length for p in self.pieces])
        self.starts = np.concatenate([[0.0], np.cumsum(lens)])
        self.length = float(self.starts[-1])

    def _locate(self, u):
        u = np.mod(np.asarray(u, dtype=float), self.length)
        k = np.clip(np.searchsorted(self.starts, u, side="right") - 1, 0, len(self.pieces) - 1)
        return u, k

    def __call__(self, u):
        u, k = self._locate(u)
        out = np.empty((len(u), 2))
        for i, p in enumerate(self.pieces):
            m = k == i
            if np.any(m):
                out[m] = p.point(u[m] - self.starts[i])
        return out

    def labels(self, u):
        _, k = self._locate(u)
        return np.array([self.pieces[i].label for i in k])

    def covered(self, lo, hi, label):
        """Length of [lo, hi] (lo <= hi, one period at most) on pieces with ``label``."""
        out = np.zeros(len(lo))
        for shift in (-self.length, 0.0, self.length):
            for i, piece in enumerate(self.pieces):
                if piece.label != label:
                    continue
                a, b = self.starts[i] + shift, self.starts[i + 1] + shift
                out += np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
        return out


def _rot(phi):
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def drop_pieces(tip, phi, rho=1.0, label="boundary"):
    """The three arcs of a drop with tip ``tip`` opening along angle ``phi``."""
    R = _rot(phi)
    t = np.asarray(tip, dtype=float)
    local = [((0.0, -rho), np.pi / 2, -np.pi / 3),
             ((np.sqrt(3.0) * rho, 0.0), 7 * np.pi / 6, 5 * np.pi / 3),
             ((0.0, rho), -np.pi / 6, -np.pi / 3)]
    return [Arc(tuple(t + R @ np.asarray(c)), rho, a0 + phi, sw, label) for c, a0, sw in local]


def drop_length(rho=1.0):
    return 7 * np.pi * rho / 3


def sample_path(path, ds, multiplicity=1, min_samples=64):
    """Equal-chord samples of a path and the fraction of each on the boundary.

    Sample k stands for the parameter window between the midpoints to its
    neighbours; the returned fraction is the part of that window lying on
    pieces labelled ``boundary``.
    """
    n = max(min_samples, int(np.ceil(path.length / ds)))
    u = equalize_chords(path, path.length, n)
    nxt = np.concatenate([u[1:], [u[0] + path.length]])
    prv = np.concatenate([[u[-1] - path.length], u[:-1]])
    lo, hi = 0.5 * (prv + u), 0.5 * (u + nxt)
    frac = path.covered(lo, hi, "boundary") / (hi - lo)
    return ClosedCurve(path(u), multiplicity), frac


def _runs(mask):
    """Cyclic runs of True in a boolean array, as index arrays."""
    n = len(mask)
    if mask.all():
        return [np.arange(n)]
    start = int(np.argmin(mask))
    idx = (np.arange(n) + start) % n
    m = mask[idx]
    runs, cur = [], []
    for i, v in zip(idx, m):
        if v:
            cur.append(i)
        elif cur:
            runs.append(np.array(cur))
            cur = []
    if cur:
        runs.append(np.array(cur))
    return runs


def jumps_from_samples(curves, fractions, u_minus=0.0, u_plus=1.0):
    """Jump set made of the boundary samples of the limit curves.

    Each particle carries its boundary fraction of the sample spacing, the
    left normal (the side where u = u_plus) and the discrete curvature of
    its curve, so the jump set shares its quadrature with the curves.
    """
    pos, w, nrm, k, polys = [], [], [], [], []
    for c, frac in zip(curves, fractions):
        on = frac > 0
        if not on.any():
            continue
        t = c.tangents()
        pos.append(c.samples[on])
        w.append(c.spacing * frac[on])
        nrm.append(np.column_stack([-t[on, 1], t[on, 0]]))
        k.append(curvature(c)[on])
        polys.extend(c.samples[r] for r in _runs(on) if len(r) > 2)
    return JumpSet(np.vstack(pos), np.concatenate(w), np.vstack(nrm), u_minus, u_plus, polys,
                   np.vstack(k))


def indicator_field(curves, n, half_width):
    """Grid indicator of the odd-winding region of closed curves."""
    bounds = (-half_width, half_width, -half_width, half_width)
    system = CurveSystem([ClosedCurve(c.samples, 1, check=False) for c in curves], validate=False)

    def fn(pts):
        return np.mod(winding_index(system, pts), 2).astype(float)
    return ScalarField.from_function(fn, n, bounds, domain=Domain.box(bounds))


def constant_family(system, n_levels):
    """Phi(t) = system for every level t in [0, 1]."""
    levels = np.linspace(0.0, 1.0, n_levels)
    return LevelFamily(levels, [system] * n_levels)


# scenes ---------------------------------------------------------------------

@dataclass
class Scene:
    """A field u with optional jump data, limit curves and varifolds.

    ``expected`` maps verdict names to their expected values and
    ``provenance`` records where each expectation comes from.
    """

    name: str
    params: dict
    u: ScalarField = None
    jumps: JumpSet = None
    family: LevelFamily = None
    varifolds: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    centers: dict = field(default_factory=dict)

    def curves(self):
        return [] if self.family is None else list(self.family.systems[0].curves)


def _check_flat(u, jumps):
    g = grid_gradient(u, jumps.segments())
    if np.any(g != 0):
        raise RuntimeError("indicator has gradient cells not separated by the jump set")


def drops_varifold(drops, ds):
    """Drops built arc by arc, with exact curvature and a particle on each tip."""
    V = Varifold.empty()
    for d in drops:
        for arc in d:
            V = V.concat(arc_varifold(arc, ds))
    return V


def _sbv_scene(name, params, paths, mults, n, half_width, ds, n_levels, drops=None):
    curves, labels = [], []
    for path, m in zip(paths, mults):
        c, lab = sample_path(path, ds, m)
        curves.append(c)
        labels.append(lab)
    jumps = jumps_from_samples(curves, labels)
    u = indicator_field(curves, n, half_width)
    _check_flat(u, jumps)
    fam = constant_family(CurveSystem(curves, validate=False), n_levels)
    s = Scene(name, dict(params, n=n, half_width=half_width, ds=ds, n_levels=n_levels), u, jumps, fam)
    s.varifolds["boundary"] = jump_varifold(jumps) if drops is None else drops_varifold(drops, ds)
    return s


def jump_varifold(jumps):
    """Varifold carried by the jump set alone, with its curvature."""
    t = np.column_stack([jumps.normals[:, 1], -jumps.normals[:, 0]])
    return Varifold(jumps.positions, line_angle(t), np.abs(jumps.gap) * jumps.weights, jumps.curvature)


def segment_varifold(a, b, ds, multiplicity=1):
    """Straight segment from a to b with zero curvature.

    Particles sit on a uniform grid including both endpoints, with
    trapezoid weights, so an endpoint lands exactly on a drop tip.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    L = float(np.hypot(*(b - a)))
    n = max(4, int(np.ceil(L / ds)))
    s = np.arange(n + 1) / n
    pos = a + np.outer(s, b - a)
    w = np.full(n + 1, multiplicity * L / n)
    w[[0, -1]] *= 0.5
    th = np.full(n + 1, line_angle((b - a)[None, :])[0])
    return Varifold(pos, th, w, np.zeros((n + 1, 2)))


def arc_varifold(arc, ds, multiplicity=1):
    """Arc particles with curvature vectors pointing to the centre.

    Like :func:`segment_varifold`, particles include both endpoints with
    trapezoid weights.
    """
    n = max(4, int(np.ceil(arc.length / ds)))
    s = np.arange(n + 1) * arc.length / n
    pos = arc.point(s)
    H = (np.asarray(arc.center) - pos) / arc.radius**2
    w = np.full(n + 1, multiplicity * arc.length / n)
    w[[0, -1]] *= 0.5
    return Varifold(pos, line_angle(arc.tangent(s)), w, H)


@lru_cache(maxsize=8)
def disk_scene(R=1.0, multiplicity=1, n=128, ds=1.0 / 64, n_levels=8):
    """u = indicator of B(0, R); Phi(t) is the circle with the given multiplicity."""
    circle = Path([Arc((0.0, 0.0), R, 0.0, 2 * np.pi)])
    c, lab = sample_path(circle, ds)
    jumps = jumps_from_samples([c], [lab])
    u = indicator_field([c], n, 2.0 * R)
    _check_flat(u, jumps)
    sysm = CurveSystem([ClosedCurve(c.samples, multiplicity)], validate=False)
    name = "disk" if multiplicity == 1 else "doubled_circle"
    s = Scene(name, dict(R=R, multiplicity=multiplicity, n=n, ds=ds, n_levels=n_levels), u, jumps,
              constant_family(sysm, n_levels))
    s.expected = {"G": 2 * np.pi * R * multiplicity * (1 + R ** -2.0), "m_mass": 2 * np.pi * R * (multiplicity - 1)}
    s.provenance = {"G": DERIVED + " 2 pi R theta (1 + R^-p) at p = 2",
                    "m_mass": DERIVED + " multiplicity excess times length"}
    s.varifolds["boundary"] = jump_varifold(jumps)
    return s


@lru_cache(maxsize=8)
def cusp_scene(L=1.0, rho=1.0, n=256, ds=1.0 / 400, n_levels=8):
    h = L / 2
    drops = [drop_pieces((h, 0.0), 0.0, rho), drop_pieces((-h, 0.0), np.pi, rho)]
    pieces = [Line((-h, 0.0), (h, 0.0))] + drops[0] + [Line((h, 0.0), (-h, 0.0))] + drops[1]
    half = np.ceil(h + (np.sqrt(3) + 1) * rho + 0.75)
    s = _sbv_scene("cusp", dict(L=L, rho=rho), [Path(pieces)], [1], n, half, ds, n_levels, drops)
    s.expected = {"G": 2 * drop_length(rho) * (1 + rho ** -1.0) + 2 * L, "m_mass": 2 * L}
    s.provenance = {"G": RECON + " two drops (1 + rho^-p) 7 pi rho/3 each plus doubled segment",
                    "m_mass": RECON + " ghost segment traversed twice over unit level span"}
    s.centers = {"tips": [(h, 0.0), (-h, 0.0)]}
    return s


@lru_cache(maxsize=8)
def cross_scene(a=0.5, rho=1.0, n=256, ds=1.0 / 400, n_levels=8):
    tips = [(a, 0.0), (0.0, a), (-a, 0.0), (0.0, -a)]
    phis = [0.0, np.pi / 2, np.pi, -np.pi / 2]
    paths = []
    drops = [drop_pieces(t, f, rho) for t, f in zip(tips, phis)]
    for k in (0, 2):
        i, j = k, k + 1
        R = _rot(phis[i])
        c = tuple(R @ np.array([a, a]))
        out_arc = Arc(c, a, phis[i] - np.pi / 2, -np.pi / 2, "ghost")
        back_arc = Arc(c, a, phis[i] + np.pi, np.pi / 2, "ghost")
        paths.append(Path(drops[i] + [out_arc] + drops[j] + [back_arc]))
    half = np.ceil(a + (np.sqrt(3) + 1) * rho + 0.75)
    s = _sbv_scene("cross", dict(a=a, rho=rho), paths, [1, 1], n, half, ds, n_levels, drops)
    cross = (segment_varifold((-a, 0.0), (a, 0.0), ds, 2)
             .concat(segment_varifold((0.0, -a), (0.0, a), ds, 2)))
    s.varifolds["cross"] = cross
    s.varifolds["boundary+cross"] = s.varifolds["boundary"].concat(cross)
    s.centers = {"tips": tips}
    s.expected = {"gap_min": 0.05}
    s.provenance = {"gap_min": PAPER + " relaxed energy strictly above min W(V)"}
    return s


@lru_cache(maxsize=8)
def triple_scene(rho=0.5, arc_radius=1.0, sweep=np.pi / 6, n=256, ds=1.0 / 400, n_levels=8):
    arcs, drops = [], []
    for k in range(3):
        phi = np.pi / 2 + 2 * np.pi * k / 3
        c = (arc_radius * np.cos(phi + np.pi / 2), arc_radius * np.sin(phi + np.pi / 2))
        arc = Arc(c, arc_radius, phi - np.pi / 2, sweep, "ghost")
        end, tan = arc.end()
        arcs.append(arc)
        drops.append(Path(drop_pieces(end, float(np.arctan2(tan[1], tan[0])), rho)))
    curves = [sample_path(d, ds)[0] for d in drops]
    half = float(np.ceil(2 * np.sin(sweep / 2) * arc_radius + (np.sqrt(3) + 1) * rho + 0.75))
    u = indicator_field(curves, n, half)
    params = dict(rho=rho, arc_radius=arc_radius, sweep=sweep, n=n, ds=ds)
    s = Scene("triple", params, u)
    V = drops_varifold([d.pieces for d in drops], ds)
    for arc in arcs:
        V = V.concat(arc_varifold(arc, ds, 2))
    s.varifolds["triple"] = V
    s.centers = {"junction": [(0.0, 0.0)]}
    s.expected = {"ratio_variation_max": 0.2, "W_finite": True}
    s.provenance = {"ratio_variation_max": PAPER + " equal angles compensate at the triple point",
                    "W_finite": PAPER + " W(V_nu) < infinity"}
    return s


@lru_cache(maxsize=8)
def trisegment_scene(ds=1.0 / 400, angles=(0.0, 90.0, 225.0)):
    V = Varifold.empty()
    for ang in angles:
        e = np.array([np.cos(np.deg2rad(ang)), np.sin(np.deg2rad(ang))])
        V = V.concat(segment_varifold((0.0, 0.0), e, ds))
    s = Scene("trisegment", dict(ds=ds, angles=tuple(angles)))
    s.varifolds["trisegment"] = V
    s.centers = {"junction": [(0.0, 0.0)]}
    s.expected = {"growth_min": 1.8}
    s.provenance = {"growth_min": PAPER + " first variation not absolutely continuous at the junction"}
    return s


_COUNTEREXAMPLES = {"cross": cross_scene, "triple": triple_scene,
                    "trisegment": trisegment_scene, "cusp": cusp_scene}


def counterexample_scene(name, **params):
    """Geometry, varifolds and expected verdicts of a counterexample scene."""
    try:
        build = _COUNTEREXAMPLES[name]
    except KeyError:
        raise ValueError(f"unknown scene {name!r}") from None
    return build(**params)


# smooth radial scenes -------------------------------------------------------

def bowl_field(n=256, radius=0.95):
    """u = 1 - |x|^2 on B(0, radius), sampled on [-1, 1]^2."""
    return ScalarField.from_function(lambda x: 1.0 - np.sum(x * x, axis=1), n, (-1, 1, -1, 1),
                                     domain=Domain.disk(radius))


def bowl_oracle(p, radius=0.95):
    """2 pi int_0^R 2r (1 + r^-p) r dr."""
    return 2 * np.pi * (2 * radius**3 / 3 + 2 * radius ** (3 - p) / (3 - p))


def bowl_levels(n_levels=40, radius=0.95):
    """Levels 1 - r^2 for r uniform in [0, radius], increasing in t."""
    r = np.linspace(radius, 0.0, n_levels)
    return 1.0 - r * r


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s * s)


def smoothed_disk_field(n=256, R=0.5, delta=0.15):
    """Indicator of B(0, R) smoothed by a quintic step of half-width delta."""
    return ScalarField.from_function(
        lambda x: _smoothstep((R + delta - np.hypot(x[:, 0], x[:, 1])) / (2 * delta)),
        n, (-1, 1, -1, 1))


def smoothed_disk_oracle(p, R=0.5, delta=0.15):
    def integrand(r):
        s = (R + delta - r) / (2 * delta)
        du = 30 * s * s * (1 - s) ** 2 / (2 * delta)
        return du * (1 + r ** -p) * 2 * np.pi * r
    return quad(integrand, R - delta, R + delta, epsabs=1e-13, epsrel=1e-12)[0]


def smoothed_disk_levels(n_levels=40, R=0.5, delta=0.15):
    """Levels u(r) for r uniform strictly inside the transition annulus."""
    r = R - delta + 2 * delta * (np.arange(n_levels, 0, -1) - 0.5) / n_levels
    return _smoothstep((R + delta - r) / (2 * delta))


def quartic_field(n=256, radius=0.95):
    """u = 1 - |x|^4 on B(0, radius)."""
    return ScalarField.from_function(lambda x: 1.0 - np.sum(x * x, axis=1) ** 2, n, (-1, 1, -1, 1),
                                     domain=Domain.disk(radius))


def quartic_oracle(p, radius=0.95):
    """|grad u| = 4 r^3, curvature 1/r: 2 pi int 4 r^3 (1 + r^-p) r dr."""
    return 2 * np.pi * 4 * (radius**5 / 5 + radius ** (5 - p) / (5 - p))


# scene runners --------------------------------------------------------------

def limit_energy(kind, p, n_circle=4096):
    """W and mass of the Young varifold of a canonical limit triplet."""
    nu = canonical_limit(kind, n_circle=n_circle)
    V = from_young(nu, curvature=radial_curvature)
    return willmore(V, p), V.mass()


def sequence_energies(kind, p, schedule=(8, 16, 32, 64)):
    seq = canonical_sequence(kind)
    out = []
    for h in schedule:
        V = from_young(from_bv(seq(h)), curvature=radial_curvature)
        out.append(willmore(V, p))
    return out


def weight_sequence_probe(kind, p=1.5):
    """lsc probe of int |H|^p d mu_V along the Young varifolds of a model sequence."""
    seq = canonical_sequence(kind)
    pairs = [curvature_measures(from_young(from_bv(seq(h))), radial_curvature) for h in seq.schedule]
    limit = curvature_measures(from_young(canonical_limit(kind)), radial_curvature)
    return lsc_probe([a for a, _ in pairs], [b for _, b in pairs], power_integrand(p), limit)


#: Grid, block and scale parameters of the randomized mollified sequences.
MOLLIFIED_GRID = 64
MOLLIFIED_BLOCK = 8
MOLLIFIED_SCALES = (2, 4, 8, 16)


def mollified_sequence(seed, n=MOLLIFIED_GRID, block=MOLLIFIED_BLOCK, scales=MOLLIFIED_SCALES):
    """Random sequence (nu_h, mu_h) -> (nu, mu) on the unit square, with its integrand.

    mu is the grid measure with weights h^2.  The limit nu = c d mu plus
    atoms m d at block centres, for a fixed unit vector d and a nonnegative
    density c that is constant on blocks of ``block`` x ``block`` cells.
    The h-th term adds Gaussian-mollified noise of correlation length
    1/h (in blocks) with its mean removed on every block, so it converges
    weakly to zero; atoms are spread over a mollifier whose support stays in
    their block.  Atoms only appear with the integrand |z|.  On every block
    Jensen's inequality then bounds G from below by the limit value, so
    the probe must pass.
    """
    from scipy.ndimage import gaussian_filter
    rng = np.random.default_rng(seed)
    h = 1.0 / n
    nb = n // block
    x = (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    pos = np.column_stack([X.ravel(), Y.ravel()])
    mu = ParticleMeasure(pos, np.full(n * n, h * h))
    ang = rng.uniform(0.0, 2 * np.pi)
    d = np.array([np.cos(ang), np.sin(ang)])
    c = np.kron(rng.uniform(0.0, 2.0, size=(nb, nb)), np.ones((block, block)))
    kind = ("abs", "sqrt1", "power")[seed % 3]
    if kind == "abs":
        f = abs_integrand()
        n_atoms = int(rng.integers(1, 4))
        cells = rng.choice(nb * nb, size=n_atoms, replace=False)
        masses = rng.uniform(0.05, 0.5, size=n_atoms)
    else:
        f = sqrt1_integrand() if kind == "sqrt1" else power_integrand(rng.uniform(1.2, 3.0))
        cells, masses = np.zeros(0, dtype=int), np.zeros(0)
    amp = rng.uniform(0.2, 1.5)
    centres = np.column_stack([(cells // nb + 0.5) * block * h, (cells % nb + 0.5) * block * h])
    lim_w = (c.ravel() * h * h)[:, None] * d
    nu = VectorParticleMeasure(np.vstack([pos, centres]),
                               np.vstack([lim_w, masses[:, None] * d]))
    nus, mus = [], []
    for k, s in enumerate(scales):
        noise = rng.standard_normal((2, n, n))
        field = np.stack([gaussian_filter(a, block / s, mode="wrap") for a in noise], axis=-1)
        field /= np.sqrt(np.mean(field ** 2))
        means = field.reshape(nb, block, nb, block, 2).mean(axis=(1, 3))
        field -= np.kron(means, np.ones((block, block, 1)))
        dens = c[..., None] * d + amp * field
        r = block * h / 2 * min(1.0, 4.0 / s)
        for (cx, cy), m in zip(centres, masses):
            q = np.clip(1.0 - ((X - cx) ** 2 + (Y - cy) ** 2) / r ** 2, 0.0, None) ** 2
            dens += (m * q / (q.sum() * h * h))[..., None] * d
        nus.append(VectorParticleMeasure(pos, dens.reshape(-1, 2) * h * h))
        mus.append(mu)
    return nus, mus, f, (nu, mu)


def mollified_probe(seed):
    nus, mus, f, limit = mollified_sequence(seed)
    return lsc_probe(nus, mus, f, limit)


def run_lsc(p=1.5, n_random=20):
    """Semicontinuity probes on random mollified sequences and the three model sequences."""
    rows = []
    bad = [s for s in range(n_random) if not mollified_probe(s).liminf_ok]
    rows.append(info_row("random sequences", n_random))
    rows.append(Row("random sequences failing", len(bad), 0, DERIVED + " Jensen on blocks", 0))
    for kind in ("osc", "conc", "concdiff"):
        rep = weight_sequence_probe(kind, p)
        rows.append(info_row(f"{kind} G limit", rep.limit_value))
        rows.append(info_row(f"{kind} G tail min", rep.tail_min))
        rows.append(check_row(f"{kind} liminf_ok", rep.liminf_ok, PAPER + " W(V_nu) <= liminf W(V_nu_h)"))
    return rows


def diffuse_oracle(p):
    return np.pi * (4 - p) / (2 - p)


def run_conc(p=1.5):
    W, mu = limit_energy("concentration", p)
    rows = [rel_row("W(V_nu) limit", W, 16 * np.pi, 0.01, PAPER + " 8pi + 4pi + 4pi"),
            rel_row("mu_V limit", mu, 8 * np.pi, 0.005, PAPER + " lambda = 4 H^1 on the unit circle")]
    seq = sequence_energies("concentration", p)
    for h, w in zip((8, 16, 32, 64), seq):
        rows.append(info_row(f"W(V_nu_h) h={h}", w))
    err = [abs(w - 16 * np.pi) for w in seq]
    rows.append(check_row("tail monotone towards 16pi", err[-1] <= err[-2] <= err[-3], PAPER))
    rows.append(rel_row("W(V_nu_h) h=64", seq[-1], 16 * np.pi, 0.03, PAPER))
    return rows


def _run_diffuse_like(kind, p):
    if not 1 < p < 2:
        raise ValueError("the diffuse and oscillation limits need 1 < p < 2")
    W, mu = limit_energy(kind, p)
    return [rel_row("W(V_nu) limit", W, diffuse_oracle(p), 0.01, PAPER + " pi (4 - p)/(2 - p)"),
            rel_row("mu_V limit", mu, np.pi, 0.005, DERIVED + " area of the unit disk")]


def run_osc(p=1.5):
    return _run_diffuse_like("oscillation", p)


def run_concdiff(p=1.5):
    return _run_diffuse_like("diffuse", p)


def _membership_rows(prefix, nu, u, jumps):
    rep = gy_membership_report(nu, u, jumps)
    return [Row(f"{prefix} barycenter residual", rep.barycenter_residual, 0.0, DERIVED + " Bar = Du", 1e-6),
            Row(f"{prefix} boundary band mass", rep.boundary_mass, 0.0, DERIVED + " lambda off the boundary",
                1e-6 * max(nu.lambda_mass(), 1e-300))]


def _candidate_rows(cands, du_mass):
    rows = []
    for k, c in enumerate(cands):
        rows.append(info_row(f"candidate {k} {c.name} W", c.W))
        rows.append(check_row(f"candidate {k} {c.name} mass >= |Du|", c.mass >= du_mass - 1e-6, PAPER))
        if c.ratio_bounded is not None:
            rows.append(info_row(f"candidate {k} {c.name} regular at singular points", c.ratio_bounded))
    return rows


def sbv_candidates(scene, p, res):
    """Candidate varifolds of an SBV scene, with membership diagnostics."""
    du = res.du_mass
    tips = scene.centers.get("tips", [])
    out = [candidate("sistema", res.V, p, du, tips, RATIO_RADII)]
    for name in ("boundary", "boundary+cross"):
        if name in scene.varifolds:
            out.append(candidate(name, scene.varifolds[name], p, du, tips, RATIO_RADII))
    return out


def run_sistema(scene, p):
    """Rows for the level-family Young measure of an SBV scene."""
    res = sistema_young_build(scene.u, scene.jumps, scene.family, p)
    rows = [info_row("G(Phi)", res.G), info_row("W(V_nu)", res.W),
            Row("|W(V_nu) - G(Phi)| / G(Phi)", abs(res.W - res.G) / res.G, 0.0, DERIVED + " shared quadrature", 1e-6)]
    if "G" in scene.expected:
        rows.append(rel_row("G(Phi) closed form", res.G, scene.expected["G"], 0.01, scene.provenance["G"]))
    if "m_mass" in scene.expected:
        exp = scene.expected["m_mass"]
        if exp > 0:
            rows.append(rel_row("m mass", res.m_mass, exp, 0.01, scene.provenance["m_mass"]))
        else:
            rows.append(Row("m mass", res.m_mass, 0.0, scene.provenance["m_mass"], 1e-9))
    rows += _membership_rows("nu", res.nu, scene.u, scene.jumps)
    rows.append(check_row("mu_V >= |Du| - 1e-6", res.V.mass() >= res.du_mass - 1e-6, PAPER))
    return res, rows


def _minvu_rows(F_bar, prov, cands, du_mass, strict=None):
    valid = [c for c in cands if c.valid]
    rep = minvu_gap(F_bar, valid, prov)
    rows = _candidate_rows(cands, du_mass)
    rows.append(info_row("F_bar estimate", F_bar, prov))
    rows.append(info_row("min W over regular candidates", rep.min_W))
    rows.append(check_row("F_bar + tol >= min W", rep.inequality_ok, PAPER))
    if strict is not None:
        rows.append(check_row(f"(F_bar - min W)/F_bar > {strict:g}", rep.gap > strict, PAPER))
        rows.append(info_row("(F_bar - min W)/F_bar", rep.gap))
    return rep, rows


def run_disk(p=2.0, multiplicity=1):
    scene = disk_scene(multiplicity=multiplicity)
    res, rows = run_sistema(scene, p)
    if p != 2.0:
        rows = [r for r in rows if r.quantity != "G(Phi) closed form"]
    return rows


def run_doubled(p=2.0):
    return run_disk(p, multiplicity=2)


def run_cusp(p=1.5):
    scene = cusp_scene()
    res, rows = run_sistema(scene, p)
    cands = sbv_candidates(scene, p, res)
    rep, r2 = _minvu_rows(res.G, DERIVED + " G(Phi) of the limit curve", cands, res.du_mass)
    rows += r2
    rows.append(rel_row("min W over regular candidates vs G(Phi)", rep.min_W, res.G, 0.01, DERIVED))
    return rows


def run_cross(p=1.3):
    scene = cross_scene()
    res, rows = run_sistema(scene, p)
    cands = sbv_candidates(scene, p, res)
    _, r2 = _minvu_rows(res.G, DERIVED + " G(Phi) of the doubled quarter-circle curves", cands,
                        res.du_mass, strict=scene.expected["gap_min"])
    rows += r2
    cross = scene.varifolds["cross"]
    rows.append(Row("W(cross) - mass(cross)", willmore(cross, p) - cross.mass(), 0.0,
                    PAPER + " no curvature on the central cross", 1e-12))
    return rows


def ratio_rows(V, center, label, radii=RATIO_RADII):
    prof = singular_ratio(V, center, radii)
    rows = [info_row(f"{label} ratio r={r:g}", q) for r, q in zip(prof.radii, prof.ratios)]
    return prof, rows


def run_triple(p=1.5):
    scene = triple_scene()
    V = scene.varifolds["triple"]
    prof, rows = ratio_rows(V, (0.0, 0.0), "junction")
    var = (prof.ratios.max() - prof.ratios.min()) / prof.ratios.max()
    rows.append(Row("junction ratio relative variation", var, 0.0, scene.provenance["ratio_variation_max"], 0.2))
    W = willmore(V, p)
    rows.append(info_row("W(V)", W))
    rows.append(check_row("W(V) finite", np.isfinite(W) and W != OVERFLOW, scene.provenance["W_finite"]))
    return rows


def run_trisegment(p=1.5):
    scene = trisegment_scene()
    prof, rows = ratio_rows(scene.varifolds["trisegment"], (0.0, 0.0), "junction")
    for k, g in enumerate(prof.growth):
        rows.append(info_row(f"growth {prof.radii[k]:g}->{prof.radii[k + 1]:g}", g))
    rows.append(check_row("ratio grows >= 1.8x per halving", bool(np.all(prof.growth >= 1.8)),
                          scene.provenance["growth_min"]))
    return rows


def run_smooth(p=2.0, n=256):
    u = bowl_field(n)
    rep = smooth_equality_check(u, p)
    oracle = bowl_oracle(p)
    rows = [rel_row("F(u)", rep.F, oracle, 0.01, DERIVED + " polar integral 2 pi int 2r(1 + r^-p) r dr"),
            rel_row("W(V_nu_Du)", rep.W, oracle, 0.01, DERIVED + " polar integral"),
            Row("|F - W| / F", rep.gap, 0.0, PAPER + " equality for smooth u", 0.01),
            check_row("mu_V >= |Du| - 1e-6", rep.mass >= rep.du_mass - 1e-6, PAPER)]
    nu = from_bv(u, polar=False)
    rows += _membership_rows("nu_Du", nu, u, None)
    return rows


def run_coarea(p=2.0, n=512, n_levels=40):
    rows = []
    rep = coarea_check(bowl_field(n), p, bowl_levels(n_levels))
    rows += [info_row("bowl F direct", rep.F_direct), info_row("bowl F levels", rep.F_levels),
             Row("bowl coarea gap", rep.gap, 0.0, DERIVED + " coarea identity", 0.02)]
    q = 1.5
    rep = coarea_check(smoothed_disk_field(n), q, smoothed_disk_levels(n_levels))
    rows += [info_row("smoothed disk F direct (p=1.5)", rep.F_direct),
             info_row("smoothed disk F levels (p=1.5)", rep.F_levels),
             Row("smoothed disk coarea gap", rep.gap, 0.0, DERIVED + " coarea identity", 0.02)]
    return rows


@dataclass(frozen=True)
class RegistryEntry:
    name: str
    description: str
    default_p: float
    expectations: tuple
    run: object


REGISTRY = {e.name: e for e in [
    RegistryEntry("osc", "oscillating radial sawtooth, limit (delta_e + delta_-e)/2", 1.5,
                  (("W(V_nu)", "pi (4-p)/(2-p)", PAPER),), run_osc),
    RegistryEntry("conc", "V-shaped radial profile concentrating on the unit circle", 1.5,
                  (("W(V_nu)", "16 pi", PAPER), ("mu_V", "8 pi", PAPER)), run_conc),
    RegistryEntry("concdiff", "h thin tents spreading concentration over the unit disk", 1.5,
                  (("W(V_nu)", "pi (4-p)/(2-p)", PAPER),), run_concdiff),
    RegistryEntry("cusp", "two drops joined by a doubled ghost segment (L=1, rho=1)", 1.5,
                  (("G(Phi)", "28 pi/3 + 2", RECON), ("m mass", "2L", RECON),
                   ("W(V_nu) - G(Phi)", "0", DERIVED)), run_cusp),
    RegistryEntry("cross", "four drops; doubled quarter circles against a straight cross (a=0.5)", 1.3,
                  (("(F_bar - min W)/F_bar", "> 0.05", PAPER),), run_cross),
    RegistryEntry("triple", "three doubled arcs meeting at 120 degrees", 1.5,
                  (("singular ratio variation", "< 0.2", PAPER), ("W(V)", "finite", PAPER)), run_triple),
    RegistryEntry("trisegment", "three unit segments at 0, 90, 225 degrees", 1.5,
                  (("singular ratio growth", ">= 1.8 per halving", PAPER),), run_trisegment),
    RegistryEntry("disk", "indicator of the unit disk, Phi = circle", 2.0,
                  (("G(Phi)", "4 pi", DERIVED), ("m mass", "0", DERIVED)), run_disk),
    RegistryEntry("doubled_circle", "indicator of the unit disk, Phi = doubled circle", 2.0,
                  (("G(Phi)", "8 pi", DERIVED), ("m mass", "2 pi", DERIVED)), run_doubled),
    RegistryEntry("smooth", "u = 1 - |x|^2 on B(0, 0.95)", 2.0,
                  (("F(u)", "2 pi (2R^3/3 + 2R^(3-p)/(3-p))", DERIVED),
                   ("|F - W|/F", "<= 0.01", PAPER)), run_smooth),
    RegistryEntry("coarea", "coarea identity on the bowl and a smoothed disk", 2.0,
                  (("coarea gap", "<= 0.02", DERIVED),), run_coarea),
    RegistryEntry("lsc", "semicontinuity probes on mollified and model sequences", 1.5,
                  (("random sequences failing", "0", DERIVED), ("liminf_ok", "1", PAPER)), run_lsc),
]}


def registry():
    """Scene registry; empty when GWV_EMPTY_REGISTRY is set."""
    import os
    if os.environ.get("GWV_EMPTY_REGISTRY"):
        return {}
    return REGISTRY


def run_scene(name, p=None):
    reg = registry()
    if name not in reg:
        raise ValueError(f"unknown scene {name!r}")
    e = reg[name]
    return e.run(e.default_p if p is None else p)


def scene_points(name):
    """(label, x, y) rows of the geometry of a scene, for plotting."""
    if name in ("osc", "conc", "concdiff"):
        nu = canonical_limit(kind_name(name))
        return [("lambda", x, y) for x, y in nu.lam.positions]
    builders = dict(_COUNTEREXAMPLES, disk=disk_scene,
                    doubled_circle=lambda: disk_scene(multiplicity=2))
    if name not in builders:
        return []
    s = builders[name]()
    out = []
    for key in sorted(s.varifolds):
        out += [(key, x, y) for x, y in s.varifolds[key].positions]
    for k, c in enumerate(s.curves()):
        out += [(f"curve{k}", x, y) for x, y in c.samples]
    return out


# identification -------------------------------------------------------------

#: Bumps whose support lies less than this fraction inside the domain are
#: left out of the per-bump comparison.
BUMP_INSIDE_FRAC = 0.5


def identification_rows(kind):
    """Identify the limit of a canonical sequence and compare with its closed form."""
    from .young import identify_limit
    kind = kind_name(kind)
    res = identify_limit(canonical_sequence(kind))
    rows = [info_row("|Du_h| last", res.mass_du), info_row("lambda mass", res.lambda_mass),
            info_row("schedule", " ".join(str(h) for h in res.schedule))]
    lam = res.node_lambda.ravel()
    nodes = res.nodes.reshape(-1, 2)
    cell = 1.0 / 16
    if kind == "oscillation":
        rows.append(Row("lambda mass / |Du|", res.lambda_mass / res.mass_du, 0.0,
                        PAPER + " oscillation leaves lambda = 0", 0.01))
    elif kind == "concentration":
        rows.append(rel_row("lambda mass", res.lambda_mass, 8 * np.pi, 0.02, PAPER + " lambda = 4 H^1 on the unit circle"))
        dist = np.abs(np.hypot(nodes[:, 0], nodes[:, 1]) - 1.0) / cell
        sig = lam > 1e-3 * lam.max()
        rows.append(info_row("support distance to circle (cells)", float(dist[sig].max())))
        rows.append(check_row("lambda within 2 cells of the unit circle", bool(dist[sig].max() <= 2.0), PAPER))
    else:
        area = res.node_area.ravel()
        keep = area >= BUMP_INSIDE_FRAC * res.node_full
        err = np.abs(lam[keep] - area[keep]) / area[keep]
        rows.append(info_row("bumps compared", int(keep.sum())))
        rows.append(Row("max per-bump |lambda - area| / area", float(err.max()), 0.0,
                        PAPER + " lambda = Lebesgue on the disk", 0.03))
    return rows
