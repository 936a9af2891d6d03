"""Systems of closed W^{2,p} curves sampled at uniform arclength."""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from . import kernels
from ._util import psum

#: Relative chord uniformity required of a ClosedCurve.
UNIFORM_TOL = 1e-6
#: Default tangency angle tolerance in degrees.
ANGLE_TOL_DEG = 2.0
#: Default contact tolerance as a fraction of the system diameter.
CONTACT_FRAC = 1e-3


def _chords(pts):
    d = np.roll(pts, -1, axis=0) - pts
    return np.hypot(d[:, 0], d[:, 1])


def equalize_chords(path, period, n, u0=0.0, tol=1e-12, max_iter=200):
    """Parameters of ``n`` points on a closed path with equal chords.

    ``path`` maps an array of parameters to (m, 2) points and is periodic
    with the given ``period``.  The first parameter stays at ``u0``.
    """
    u = u0 + period * np.arange(n) / n
    for _ in range(max_iter):
        pts = path(u)
        c = _chords(pts)
        mean = c.mean()
        if np.max(np.abs(c - mean)) <= tol * mean:
            break
        s = np.concatenate([[0.0], np.cumsum(c)])
        target = s[-1] * np.arange(n) / n
        uu = np.concatenate([u, [u[0] + period]])
        u = np.interp(target, s, uu)
    return u


class ClosedCurve:
    """Closed curve given by N samples at uniform arclength.

    Parameters
    ----------
    samples : (N, 2) array, periodic (sample N wraps to sample 0)
    multiplicity : positive int
    check : bool
        Validate the uniform-chord and size invariants.
    """

    def __init__(self, samples, multiplicity=1, check=True):
        pts = np.array(samples, dtype=np.float64).reshape(-1, 2)
        if len(pts) < 16:
            raise ValueError("a closed curve needs at least 16 samples")
        if int(multiplicity) != multiplicity or multiplicity < 1:
            raise ValueError("multiplicity must be a positive integer")
        c = _chords(pts)
        self.spacing = psum(c) / len(pts)
        if not self.spacing > 0:
            raise ValueError("degenerate curve")
        self.uniformity = float(np.max(np.abs(c - self.spacing)) / self.spacing)
        if check and self.uniformity > UNIFORM_TOL:
            raise ValueError(f"samples not at uniform arclength (dev {self.uniformity:.2e})")
        pts.setflags(write=False)
        self.samples = pts
        self.multiplicity = int(multiplicity)

    def __len__(self):
        return len(self.samples)

    def __repr__(self):
        return f"ClosedCurve(N={len(self)}, length={self.length:.6g}, mult={self.multiplicity})"

    @property
    def length(self):
        return len(self.samples) * self.spacing

    def segments(self):
        p = self.samples
        return np.hstack([p, np.roll(p, -1, axis=0)])

    def tangents(self):
        """Unit tangents from centred differences of neighbouring samples."""
        d = np.roll(self.samples, -1, axis=0) - np.roll(self.samples, 1, axis=0)
        return d / np.hypot(d[:, 0], d[:, 1])[:, None]

    def transformed(self, rotation=0.0, shift=(0.0, 0.0)):
        c, s = np.cos(rotation), np.sin(rotation)
        r = np.array([[c, -s], [s, c]])
        return ClosedCurve(self.samples @ r.T + np.asarray(shift), self.multiplicity, check=False)


def resample_arclength(points, n, method="linear"):
    """Resample a closed polyline to ``n`` points at uniform arclength.

    The polyline is parametrized by cumulative chord length (linearly, or
    by a periodic cubic spline when ``method="spline"``); sample positions
    are then moved along it until all chords are equal.  The first sample
    stays at the first input vertex.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    keep = np.ones(len(pts), dtype=bool)
    if len(pts) > 1:
        keep[1:] = np.any(np.diff(pts, axis=0) != 0, axis=1)
    pts = pts[keep]
    if len(np.unique(pts, axis=0)) < 3:
        raise ValueError("degenerate polyline: need at least 3 distinct points")
    c = _chords(pts)
    total = float(c.sum())
    if not total > 0:
        raise ValueError("degenerate polyline: zero length")
    s = np.concatenate([[0.0], np.cumsum(c)])
    closed = np.vstack([pts, pts[:1]])
    if method == "spline":
        spl = CubicSpline(s, closed, bc_type="periodic")

        def path(u):
            return spl(np.mod(u, total))
    elif method == "linear":
        def path(u):
            u = np.mod(u, total)
            return np.column_stack([np.interp(u, s, closed[:, 0]), np.interp(u, s, closed[:, 1])])
    else:
        raise ValueError(f"unknown method {method!r}")
    u = equalize_chords(path, total, int(n))
    return ClosedCurve(path(u))


def curvature(c):
    """Curvature vectors by periodic second differences at uniform spacing."""
    x = c.samples
    return (np.roll(x, 1, axis=0) - 2.0 * x + np.roll(x, -1, axis=0)) / c.spacing**2


def curvature_norm(c):
    k = curvature(c)
    return np.hypot(k[:, 0], k[:, 1])


class CurveSystem:
    """Finite family of closed curves with tangential contacts only.

    Parameters
    ----------
    curves : sequence of ClosedCurve
    validate : bool
        Reject transversal crossings and non-tangential contacts.
    contact_tol : float, optional
        Defaults to 1e-3 times the diameter of the union of the traces.
    angle_tol_deg : float
    """

    def __init__(self, curves, validate=True, contact_tol=None, angle_tol_deg=ANGLE_TOL_DEG):
        self.curves = tuple(curves)
        self.angle_tol_deg = float(angle_tol_deg)
        self.contact_tol = self._default_tol() if contact_tol is None else float(contact_tol)
        if validate and self.curves:
            bad = self.contact_violations()
            if bad:
                raise ValueError(f"curves cross or touch transversally ({bad} violations)")

    def __len__(self):
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)

    def __repr__(self):
        return f"CurveSystem({len(self)} curves)"

    def _default_tol(self):
        if not self.curves:
            return 0.0
        pts = np.vstack([c.samples for c in self.curves])
        diam = float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))
        return CONTACT_FRAC * diam

    def samples(self):
        if not self.curves:
            return np.zeros((0, 2))
        return np.vstack([c.samples for c in self.curves])

    def segments(self):
        if not self.curves:
            return np.zeros((0, 4))
        return np.vstack([c.segments() for c in self.curves])

    def contact_violations(self):
        """Transversal crossings plus close sample pairs with non-parallel lines."""
        sin_tol = np.sin(np.deg2rad(self.angle_tol_deg))
        count = 0
        for i, a in enumerate(self.curves):
            sa = a.segments()
            count += kernels.crossing_count(sa, sa, sin_tol) // 2
            for b in self.curves[i + 1:]:
                count += kernels.crossing_count(sa, b.segments(), sin_tol)
        pts = self.samples()
        if self.contact_tol > 0 and len(pts) > 1:
            tans = np.vstack([c.tangents() for c in self.curves])
            owner = np.concatenate([np.full(len(c), k) for k, c in enumerate(self.curves)])
            local = np.concatenate([np.arange(len(c)) for c in self.curves])
            pairs = cKDTree(pts).query_pairs(self.contact_tol, output_type="ndarray")
            if len(pairs):
                a, b = pairs[:, 0], pairs[:, 1]
                same = owner[a] == owner[b]
                n = np.array([len(c) for c in self.curves])[owner[a]]
                gap = np.abs(local[a] - local[b])
                gap = np.minimum(gap, n - gap)
                win = np.ceil(4 * self.contact_tol / np.array([c.spacing for c in self.curves])[owner[a]]) + 1
                keep = ~(same & (gap <= win))
                cross = np.abs(tans[a, 0] * tans[b, 1] - tans[a, 1] * tans[b, 0])
                count += int(np.sum(keep & (cross > sin_tol)))
        return count


@dataclass
class LevelFamily:
    """Curve systems attached to an increasing sequence of levels."""

    levels: np.ndarray
    systems: list

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=np.float64)
        self.systems = list(self.systems)
        if len(self.levels) != len(self.systems):
            raise ValueError("one system per level required")
        if np.any(np.diff(self.levels) <= 0):
            raise ValueError("levels must be strictly increasing")

    def trapezoid_weights(self):
        t = self.levels
        w = np.zeros(len(t))
        if len(t) >= 2:
            dt = np.diff(t)
            w[:-1] += 0.5 * dt
            w[1:] += 0.5 * dt
        return w


def _check_p(p):
    if not p > 1:
        raise ValueError("exponent must exceed 1")


def curve_energy(c, p):
    """Willmore energy of a single curve, multiplicity included."""
    _check_p(p)
    k = curvature_norm(c)
    return c.multiplicity * psum((1.0 + k**p) * c.spacing)


def willmore_energy(system, p):
    """W(Gamma) = sum_i theta_i sum (1 + |k|^p) ds."""
    _check_p(p)
    return psum(np.array([curve_energy(c, p) for c in system.curves]))


def winding_index(system, x):
    """Multiplicity-weighted winding number of the system around points."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
    total = np.zeros(len(x), dtype=np.int64)
    for c in system.curves:
        total += c.multiplicity * kernels.winding_numbers(x, c.samples)
    return total


def trace_distance(system, x):
    x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
    return kernels.min_distance(x, system.segments())


def interior_indicator(system, x, tol=None):
    """Parity of the winding index; 1 inside Int(Gamma), 0 outside.

    Accepts a single point or an (n, 2) array.  Points within the contact
    tolerance of the trace raise ``ValueError("point on trace")``.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    pts = arr.reshape(-1, 2)
    if len(system) == 0:
        out = np.zeros(len(pts), dtype=np.int64)
        return int(out[0]) if single else out
    tol = system.contact_tol if tol is None else tol
    if np.any(trace_distance(system, pts) <= tol):
        raise ValueError("point on trace")
    out = np.mod(winding_index(system, pts), 2)
    return int(out[0]) if single else out


@dataclass
class NestednessReport:
    crossings: list = field(default_factory=list)
    inclusion_violations: list = field(default_factory=list)
    outside_fraction: list = field(default_factory=list)
    no_crossing: bool = True
    inclusion: bool = True
    trace_inside: bool = True

    @property
    def ok(self):
        return self.no_crossing and self.inclusion and self.trace_inside


def probe_lattice(bounds, n):
    """Regular n x n lattice of probe points in (xmin, xmax, ymin, ymax)."""
    x0, x1, y0, y1 = bounds
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def nestedness_check(family, probes, frac_tol=1e-3):
    """Check the class conditions (i)-(iii) between consecutive levels.

    (i) no transversal crossings between Phi(t_lo) and Phi(t_hi);
    (ii) Int(Phi(t_hi)) is contained in Int(Phi(t_lo)) on the probes that
    are not within contact tolerance of either trace;
    (iii) the fraction of Phi(t_hi) samples lying neither within tolerance of
    the lower trace nor inside Int(Phi(t_lo)) is below ``frac_tol``.
    """
    if len(family.levels) < 2:
        raise ValueError("nestedness needs at least two levels")
    probes = np.asarray(probes, dtype=np.float64).reshape(-1, 2)
    rep = NestednessReport()
    for lo, hi in zip(family.systems[:-1], family.systems[1:]):
        tol = max(lo.contact_tol, hi.contact_tol)
        sin_tol = np.sin(np.deg2rad(ANGLE_TOL_DEG))
        cr = 0
        if len(lo) and len(hi):
            cr = kernels.crossing_count(lo.segments(), hi.segments(), sin_tol)
        rep.crossings.append(cr)
        viol = 0
        if len(hi):
            far = trace_distance(hi, probes) > tol
            if len(lo):
                far &= trace_distance(lo, probes) > tol
            p = probes[far]
            i_hi = np.mod(winding_index(hi, p), 2)
            i_lo = np.mod(winding_index(lo, p), 2) if len(lo) else np.zeros(len(p), dtype=np.int64)
            viol = int(np.sum((i_hi == 1) & (i_lo == 0)))
        rep.inclusion_violations.append(viol)
        frac = 0.0
        if len(hi):
            s = hi.samples()
            if len(lo):
                near = trace_distance(lo, s) <= tol
                inside = np.mod(winding_index(lo, s), 2) == 1
                frac = float(np.mean(~near & ~inside))
            else:
                frac = 1.0
        rep.outside_fraction.append(frac)
    rep.no_crossing = all(c == 0 for c in rep.crossings)
    rep.inclusion = all(v == 0 for v in rep.inclusion_violations)
    rep.trace_inside = all(f < frac_tol for f in rep.outside_fraction)
    return rep


def level_energy(family, p):
    """G(Phi) by the trapezoid rule over levels."""
    _check_p(p)
    if len(family.levels) < 2:
        raise ValueError("level energy needs at least two levels")
    e = np.array([willmore_energy(s, p) for s in family.systems])
    return psum(family.trapezoid_weights() * e)
