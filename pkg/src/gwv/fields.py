"""Grid fields, exact radial profiles, and jump sets with traces."""

from dataclasses import dataclass

import numpy as np


class ScalarField:
    """Cell-centred samples of u on a rectangular grid.

    Parameters
    ----------
    values : (nx, ny) array; ``values[i, j]`` sits at
        ``origin + ((i + 1/2) h, (j + 1/2) h)``.
    origin : lower-left corner of the grid.
    spacing : cell size h.
    gradient_floor : float, optional
        Cells with |grad u| below it carry zero integrand.  Defaults to
        1e-8 times the largest gradient norm on the grid.
    domain : callable, optional
        ``inside(points) -> bool array``; cells are weighted by the fraction
        of an 8 x 8 subsample lying inside.  None means the whole grid.
    radial : RadialProfile, optional
        Exact radial description of the same function, used by
        :func:`gwv.young.from_bv` for polar discretizations.
    """

    def __init__(self, values, origin=(0.0, 0.0), spacing=1.0, gradient_floor=None,
                 domain=None, radial=None):
        v = np.array(values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if not spacing > 0:
            raise ValueError("spacing must be positive")
        v.setflags(write=False)
        self.values = v
        self.origin = (float(origin[0]), float(origin[1]))
        self.h = float(spacing)
        self._floor = gradient_floor
        self.domain = domain
        self.radial = radial
        self._fraction = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def bounds(self):
        nx, ny = self.shape
        x0, y0 = self.origin
        return (x0, x0 + nx * self.h, y0, y0 + ny * self.h)

    def axes(self):
        nx, ny = self.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.h
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.h
        return xs, ys

    def centers(self):
        xs, ys = self.axes()
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx, gy], axis=-1)

    def domain_fraction(self):
        """Fraction of each cell inside the domain (8 x 8 subsampling)."""
        if self._fraction is None:
            if self.domain is None:
                self._fraction = np.ones(self.shape)
            else:
                c = self.centers()
                off = (np.arange(8) + 0.5) / 8 - 0.5
                acc = np.zeros(self.shape)
                for a in off:
                    for b in off:
                        p = c + self.h * np.array([a, b])
                        acc += np.asarray(self.domain(p.reshape(-1, 2)), dtype=float).reshape(self.shape)
                self._fraction = acc / 64.0
        return self._fraction

    def gradient_floor(self, grad_norm):
        if self._floor is not None:
            return float(self._floor)
        m = float(np.max(grad_norm)) if grad_norm.size else 0.0
        return 1e-8 * m

    def with_values(self, values):
        return ScalarField(values, self.origin, self.h, self._floor, self.domain, self.radial)

    @classmethod
    def from_function(cls, fn, n, bounds, domain=None, radial=None, gradient_floor=None):
        """Sample ``fn(points) -> values`` on an n x n grid over a square box."""
        x0, x1, y0, y1 = bounds
        h = (x1 - x0) / n
        if not np.isclose((y1 - y0) / n, h):
            raise ValueError("bounds must describe a square grid")
        tmp = cls(np.zeros((n, n)), (x0, y0), h)
        vals = np.asarray(fn(tmp.centers().reshape(-1, 2)), dtype=float).reshape(n, n)
        return cls(vals, (x0, y0), h, gradient_floor, domain, radial)


def disk_domain(radius, center=(0.0, 0.0)):
    c = np.asarray(center, dtype=float)

    def inside(p):
        d = np.asarray(p, dtype=float) - c
        return d[:, 0] ** 2 + d[:, 1] ** 2 < radius * radius
    return inside


def annulus_domain(r0, r1):
    def inside(p):
        r2 = np.sum(np.asarray(p, dtype=float) ** 2, axis=1)
        return (r2 > r0 * r0) & (r2 < r1 * r1)
    return inside


@dataclass(frozen=True)
class RadialProfile:
    """Piecewise linear radial function u(x) = phi(|x|) on B(0, R).

    ``breaks`` holds r_0 = 0 < r_1 < ... < r_K = R; on [r_i, r_{i+1}] the
    profile is ``left[i] + slope[i] * (r - r_i)``.  Discontinuities between
    consecutive pieces are jumps of u across circles.
    """

    breaks: tuple
    slope: tuple
    left: tuple

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breaks must start at 0 and increase")
        if len(self.slope) != len(b) - 1 or len(self.left) != len(b) - 1:
            raise ValueError("one slope and left value per piece")

    @property
    def radius(self):
        return float(self.breaks[-1])

    def arrays(self):
        return (np.asarray(self.breaks, dtype=float), np.asarray(self.slope, dtype=float),
                np.asarray(self.left, dtype=float))

    def __call__(self, r):
        b, s, l0 = self.arrays()
        r = np.asarray(r, dtype=float)
        i = np.clip(np.searchsorted(b, r, side="right") - 1, 0, len(s) - 1)
        out = l0[i] + s[i] * (r - b[i])
        return np.where(r <= b[-1], out, l0[-1] + s[-1] * (b[-1] - b[-2]))

    def jumps(self, tol=1e-14):
        """(radius, inner trace, outer trace) for every interior discontinuity."""
        b, s, l0 = self.arrays()
        out = []
        for i in range(1, len(s)):
            inner = l0[i - 1] + s[i - 1] * (b[i] - b[i - 1])
            outer = l0[i]
            if abs(outer - inner) > tol:
                out.append((float(b[i]), float(inner), float(outer)))
        return out

    def total_variation(self):
        """|Du|(B(0, R)) in closed form."""
        b, s, _ = self.arrays()
        ac = np.sum(np.abs(s) * np.pi * (b[1:] ** 2 - b[:-1] ** 2))
        jmp = sum(2 * np.pi * r * abs(o - i) for r, i, o in self.jumps())
        return float(ac + jmp)

    @staticmethod
    def from_pieces(pieces, radius):
        """Build from (r_start, r_end, value_at_start, slope) pieces; gaps are 0."""
        pieces = sorted(pieces)
        breaks, slope, left = [0.0], [], []
        cur = 0.0
        for a, b, v, s in pieces:
            if a > cur + 1e-15:
                slope.append(0.0)
                left.append(0.0)
                breaks.append(a)
            slope.append(s)
            left.append(v)
            breaks.append(b)
            cur = b
        if radius > cur + 1e-15:
            slope.append(0.0)
            left.append(0.0)
            breaks.append(radius)
        return RadialProfile(tuple(breaks), tuple(slope), tuple(left))


class JumpSet:
    """Jump set J_u as arclength particles with traces.

    Parameters
    ----------
    positions : (n, 2) particle positions on J_u.
    weights : (n,) arclength carried by each particle.
    normals : (n, 2) unit normals pointing towards the ``u_plus`` side.
    u_minus, u_plus : (n,) traces.
    polylines : list of (m, 2) arrays, closed, used to detect grid stencils
        that straddle the jump.
    curvature : optional (n, 2) curvature vectors of J_u at the particles.
    """

    def __init__(self, positions, weights, normals, u_minus, u_plus, polylines, curvature=None):
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        n = len(self.positions)
        self.weights = np.asarray(weights, dtype=float).reshape(n)
        self.normals = np.asarray(normals, dtype=float).reshape(n, 2)
        self.u_minus = np.broadcast_to(np.asarray(u_minus, dtype=float), (n,)).copy()
        self.u_plus = np.broadcast_to(np.asarray(u_plus, dtype=float), (n,)).copy()
        self.polylines = [np.asarray(p, dtype=float).reshape(-1, 2) for p in polylines]
        self.curvature = None if curvature is None else np.asarray(curvature, dtype=float).reshape(n, 2)

    def __len__(self):
        return len(self.positions)

    @property
    def gap(self):
        return self.u_plus - self.u_minus

    def segments(self):
        segs = [np.hstack([p, np.roll(p, -1, axis=0)]) for p in self.polylines if len(p) > 1]
        return np.vstack(segs) if segs else np.zeros((0, 4))

    @classmethod
    def from_polylines(cls, polylines, u_minus, u_plus, plus_side="left"):
        """Particles at the vertices of closed polylines.

        Each vertex carries half of its two adjacent chords; the normal is the
        rotated centred-difference tangent, turned towards ``plus_side``.
        """
        pos, w, nrm, um, up = [], [], [], [], []
        for k, p in enumerate(polylines):
            p = np.asarray(p, dtype=float).reshape(-1, 2)
            nxt, prv = np.roll(p, -1, axis=0), np.roll(p, 1, axis=0)
            c_next = np.hypot(*(nxt - p).T)
            c_prev = np.hypot(*(p - prv).T)
            t = nxt - prv
            t /= np.hypot(t[:, 0], t[:, 1])[:, None]
            left = np.column_stack([-t[:, 1], t[:, 0]])
            pos.append(p)
            w.append(0.5 * (c_next + c_prev))
            nrm.append(left if plus_side == "left" else -left)
            a = u_minus[k] if np.ndim(u_minus) else u_minus
            b = u_plus[k] if np.ndim(u_plus) else u_plus
            um.append(np.full(len(p), a, dtype=float))
            up.append(np.full(len(p), b, dtype=float))
        return cls(np.vstack(pos), np.concatenate(w), np.vstack(nrm), np.concatenate(um),
                   np.concatenate(up), polylines)


def cut_edges(field, segs):
    """Grid stencil edges crossed by the given segments.

    Returns boolean arrays ``cx`` of shape (nx-1, ny) for edges between
    cells (i, j) and (i+1, j), and ``cy`` of shape (nx, ny-1).
    """
    nx, ny = field.shape
    h = field.h
    xs, ys = field.axes()
    cx = np.zeros((max(nx - 1, 0), ny), dtype=bool)
    cy = np.zeros((nx, max(ny - 1, 0)), dtype=bool)
    if len(segs) == 0:
        return cx, cy
    ax, ay, bx, by = segs.T
    # horizontal stencil edges lie on lines y = ys[j]
    lo = np.minimum(ay, by)
    hi = np.maximum(ay, by)
    j0 = np.ceil((lo - ys[0]) / h).astype(np.int64)
    j1 = np.ceil((hi - ys[0]) / h).astype(np.int64)
    cnt = np.maximum(j1 - j0, 0)
    if cnt.sum():
        seg = np.repeat(np.arange(len(segs)), cnt)
        jj = np.repeat(j0, cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
        yl = ys[0] + jj * h
        t = (yl - ay[seg]) / (by[seg] - ay[seg])
        xc = ax[seg] + t * (bx[seg] - ax[seg])
        ii = np.floor((xc - xs[0]) / h).astype(np.int64)
        ok = (jj >= 0) & (jj < ny) & (ii >= 0) & (ii < nx - 1)
        cx[ii[ok], jj[ok]] = True
    lo = np.minimum(ax, bx)
    hi = np.maximum(ax, bx)
    i0 = np.ceil((lo - xs[0]) / h).astype(np.int64)
    i1 = np.ceil((hi - xs[0]) / h).astype(np.int64)
    cnt = np.maximum(i1 - i0, 0)
    if cnt.sum():
        seg = np.repeat(np.arange(len(segs)), cnt)
        ii = np.repeat(i0, cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
        xl = xs[0] + ii * h
        t = (xl - ax[seg]) / (bx[seg] - ax[seg])
        yc = ay[seg] + t * (by[seg] - ay[seg])
        jj = np.floor((yc - ys[0]) / h).astype(np.int64)
        ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny - 1)
        cy[ii[ok], jj[ok]] = True
    return cx, cy


def grid_gradient(field, segs=None):
    """Central-difference gradient, one-sided next to cut stencils.

    Returns an (nx, ny, 2) array.  Where both neighbours along an axis are
    cut (or missing) the derivative along that axis is set to zero.
    """
    u = field.values
    h = field.h
    nx, ny = u.shape
    if segs is None:
        segs = np.zeros((0, 4))
    cx, cy = cut_edges(field, segs)
    g = np.zeros((nx, ny, 2))
    for axis, cut in ((0, cx), (1, cy)):
        d = np.diff(u, axis=axis) / h
        ok = ~cut
        if axis == 0:
            right_ok = np.zeros((nx, ny), dtype=bool)
            right_ok[:-1] = ok
            left_ok = np.zeros((nx, ny), dtype=bool)
            left_ok[1:] = ok
            dr = np.zeros((nx, ny))
            dr[:-1] = d
            dl = np.zeros((nx, ny))
            dl[1:] = d
        else:
            right_ok = np.zeros((nx, ny), dtype=bool)
            right_ok[:, :-1] = ok
            left_ok = np.zeros((nx, ny), dtype=bool)
            left_ok[:, 1:] = ok
            dr = np.zeros((nx, ny))
            dr[:, :-1] = d
            dl = np.zeros((nx, ny))
            dl[:, 1:] = d
        both = right_ok & left_ok
        out = np.where(both, 0.5 * (dr + dl), np.where(right_ok, dr, np.where(left_ok, dl, 0.0)))
        g[..., axis] = out
    return g


class Domain:
    """Box or disk domain; callable as an inside test on (n, 2) points."""

    def __init__(self, kind, bounds=None, radius=None, center=(0.0, 0.0)):
        if kind not in ("box", "disk"):
            raise ValueError(f"unknown domain kind {kind!r}")
        self.kind = kind
        self.center = (float(center[0]), float(center[1]))
        if kind == "box":
            self._bounds = tuple(float(b) for b in bounds)
            self.radius = None
        else:
            self.radius = float(radius)
            cx, cy = self.center
            self._bounds = (cx - self.radius, cx + self.radius, cy - self.radius, cy + self.radius)

    @classmethod
    def box(cls, bounds):
        return cls("box", bounds=bounds)

    @classmethod
    def disk(cls, radius, center=(0.0, 0.0)):
        return cls("disk", radius=radius, center=center)

    @property
    def bounds(self):
        return self._bounds

    def __call__(self, p):
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        return self.boundary_distance(p) > 0

    def boundary_distance(self, p):
        """Signed distance to the boundary, positive inside."""
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        if self.kind == "disk":
            return self.radius - np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1])
        x0, x1, y0, y1 = self._bounds
        return np.minimum.reduce([p[:, 0] - x0, x1 - p[:, 0], p[:, 1] - y0, y1 - p[:, 1]])

    def area(self):
        if self.kind == "disk":
            return np.pi * self.radius**2
        x0, x1, y0, y1 = self._bounds
        return (x1 - x0) * (y1 - y0)

    def to_dict(self):
        if self.kind == "disk":
            return {"kind": "disk", "radius": self.radius, "center": list(self.center)}
        return {"kind": "box", "bounds": list(self._bounds)}

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "disk":
            return cls.disk(d["radius"], d.get("center", (0.0, 0.0)))
        return cls.box(d["bounds"])


#: Innermost radius of the graded rings next to the origin.
R_MIN = 1e-14
#: Ratio between consecutive graded radii next to the origin.
GRADING = 1.05


def polar_edges(breaks, dr_max, min_sub=1, graded=True):
    """Ring radii that contain every breakpoint.

    The first interval is graded geometrically towards the origin (so that
    radial singularities like 1/|x|^p are integrated accurately); the others
    are split uniformly into pieces no longer than ``dr_max``.
    """
    b = np.asarray(breaks, dtype=float)
    edges = [0.0]
    for i, (a, c) in enumerate(zip(b[:-1], b[1:])):
        if i == 0 and graded and a == 0.0:
            n_geo = int(np.ceil(np.log(c / R_MIN) / np.log(GRADING)))
            geo = c * GRADING ** (-np.arange(n_geo, 0, -1, dtype=float))
            # geometric rings below the first uniform piece
            n_sub = max(min_sub, int(np.ceil(c / dr_max)))
            top = c / n_sub
            geo = geo[geo < top]
            edges.extend(geo.tolist())
            edges.extend((top * np.arange(1, n_sub + 1)).tolist())
            edges[-1] = c
        else:
            n_sub = max(min_sub, int(np.ceil((c - a) / dr_max)))
            pts = a + (c - a) * np.arange(1, n_sub + 1) / n_sub
            pts[-1] = c
            edges.extend(pts.tolist())
    return np.array(edges)


@dataclass(frozen=True)
class PolarMesh:
    """Annular sectors with exact areas and centroid-radius nodes."""

    centers: np.ndarray
    areas: np.ndarray
    r_node: np.ndarray
    theta: np.ndarray
    ring: np.ndarray
    edges: np.ndarray


def polar_mesh(edges, ds):
    """Split every ring into sectors of arc length about ``ds`` (multiple of 4)."""
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    m = 4 * np.ceil(np.maximum(16.0, 2 * np.pi * b / ds) / 4).astype(np.int64)
    ring = np.repeat(np.arange(len(a)), m)
    first = np.repeat(np.cumsum(m) - m, m)
    j = np.arange(m.sum()) - first
    dth = 2 * np.pi / m[ring]
    th = (j + 0.5) * dth
    aa, bb = a[ring], b[ring]
    rc = (2.0 / 3.0) * (bb**3 - aa**3) / (bb**2 - aa**2)
    areas = 0.5 * (bb**2 - aa**2) * dth
    centers = np.column_stack([rc * np.cos(th), rc * np.sin(th)])
    return PolarMesh(centers, areas, rc, th, ring, edges)
