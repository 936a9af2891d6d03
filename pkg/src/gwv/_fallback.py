"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same floating point operation order wherever that is practical.
"""

import numpy as np

_CHUNK = 1 << 20


def pairwise_sum(a):
    """Sum a 1-d array with a fixed binary tree.

    Odd levels are padded with an exact zero, so the tree shape depends only
    on the length of ``a``.
    """
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    while a.size > 1:
        if a.size % 2:
            a = np.append(a, 0.0)
        a = a[0::2] + a[1::2]
    return float(a[0])


def bump_rows(x, centers, radii):
    """Sparse evaluation of the bump battery b_j(x) = (1 - |x-c_j|^2/R_j^2)^3.

    Returns ``(rows, cols, b, gx, gy)`` for every pair with |x-c_j| < R_j,
    ordered by row and then by particle index.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    radii = np.ascontiguousarray(radii, dtype=np.float64)
    rows, cols = [], []
    if len(x) and len(centers):
        order = np.argsort(x[:, 0], kind="stable")
        xs = x[order, 0]
        lo = np.searchsorted(xs, centers[:, 0] - radii, side="left")
        hi = np.searchsorted(xs, centers[:, 0] + radii, side="right")
        for j in range(len(centers)):
            idx = order[lo[j]:hi[j]]
            if idx.size == 0:
                continue
            d = x[idx] - centers[j]
            s = (d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]) / (radii[j] * radii[j])
            keep = np.sort(idx[s < 1.0])
            rows.append(np.full(keep.size, j, dtype=np.int64))
            cols.append(keep)
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols).astype(np.int64)
    else:
        rows = np.zeros(0, dtype=np.int64)
        cols = np.zeros(0, dtype=np.int64)
    dx = x[cols, 0] - centers[rows, 0]
    dy = x[cols, 1] - centers[rows, 1]
    r2 = radii[rows] * radii[rows]
    s = (dx * dx + dy * dy) / r2
    om = 1.0 - s
    b = om * om * om
    g = -6.0 * om * om / r2
    return rows, cols, b, g * dx, g * dy


def winding_numbers(points, verts):
    """Winding number of a closed polygon (implicitly closed) around points."""
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    a = verts
    b = np.roll(verts, -1, axis=0)
    out = np.zeros(len(points), dtype=np.int64)
    step = max(1, _CHUNK // max(1, len(points)))
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    for s in range(0, len(a), step):
        ax, ay = a[s:s + step, 0][None, :], a[s:s + step, 1][None, :]
        bx, by = b[s:s + step, 0][None, :], b[s:s + step, 1][None, :]
        cross = (bx - ax) * (py - ay) - (px - ax) * (by - ay)
        up = (ay <= py) & (by > py) & (cross > 0)
        down = (ay > py) & (by <= py) & (cross < 0)
        out += up.sum(axis=1) - down.sum(axis=1)
    return out


def crossing_count(sa, sb, sin_tol):
    """Count proper transversal intersections between two segment sets.

    Segments are rows ``(x0, y0, x1, y1)``.  Pairs whose directions are
    within ``asin(sin_tol)`` of parallel are treated as tangential.
    """
    sa = np.ascontiguousarray(sa, dtype=np.float64).reshape(-1, 4)
    sb = np.ascontiguousarray(sb, dtype=np.float64).reshape(-1, 4)
    total = 0
    if len(sa) == 0 or len(sb) == 0:
        return 0
    step = max(1, _CHUNK // len(sb))
    bx0, by0, bx1, by1 = (sb[:, k][None, :] for k in range(4))
    ex, ey = bx1 - bx0, by1 - by0
    lb = np.hypot(ex, ey)
    for s in range(0, len(sa), step):
        blk = sa[s:s + step]
        ax0, ay0, ax1, ay1 = (blk[:, k][:, None] for k in range(4))
        dx, dy = ax1 - ax0, ay1 - ay0
        la = np.hypot(dx, dy)
        o1 = dx * (by0 - ay0) - dy * (bx0 - ax0)
        o2 = dx * (by1 - ay0) - dy * (bx1 - ax0)
        o3 = ex * (ay0 - by0) - ey * (ax0 - bx0)
        o4 = ex * (ay1 - by0) - ey * (ax1 - bx0)
        cr = np.abs(dx * ey - dy * ex)
        hit = (o1 * o2 < 0) & (o3 * o4 < 0) & (cr > sin_tol * la * lb)
        total += int(hit.sum())
    return total


def min_distance(points, segs):
    """Distance from each point to the nearest of a set of segments."""
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    segs = np.ascontiguousarray(segs, dtype=np.float64).reshape(-1, 4)
    out = np.full(len(points), np.inf)
    if len(segs) == 0:
        return out
    ax, ay = segs[:, 0][None, :], segs[:, 1][None, :]
    dx, dy = (segs[:, 2] - segs[:, 0])[None, :], (segs[:, 3] - segs[:, 1])[None, :]
    ll = dx * dx + dy * dy
    safe = np.where(ll > 0, ll, 1.0)
    step = max(1, _CHUNK // len(segs))
    for s in range(0, len(points), step):
        px = points[s:s + step, 0][:, None]
        py = points[s:s + step, 1][:, None]
        t = ((px - ax) * dx + (py - ay) * dy) / safe
        t = np.where(ll > 0, np.clip(t, 0.0, 1.0), 0.0)
        qx = ax + t * dx - px
        qy = ay + t * dy - py
        out[s:s + step] = np.sqrt((qx * qx + qy * qy).min(axis=1))
    return out


def _bspline_weights(f):
    g = 1.0 - f
    w0 = g * g * g / 6.0
    w1 = (3.0 * f * f * f - 6.0 * f * f + 4.0) / 6.0
    w2 = (-3.0 * f * f * f + 3.0 * f * f + 3.0 * f + 1.0) / 6.0
    w3 = f * f * f / 6.0
    return (w0, w1, w2, w3)


def bspline_scatter(pos, vals, origin, cell, nx, ny):
    """Scatter particle values onto cubic B-spline nodes at cell centres.

    Node (i, j) sits at ``origin + (i + 1/2, j + 1/2) * cell``; the nodal
    functions form a partition of unity with support of four cells per axis.
    """
    pos = np.ascontiguousarray(pos, dtype=np.float64).reshape(-1, 2)
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[:, None]
    q = vals.shape[1]
    out = np.zeros((nx, ny, q))
    u = (pos[:, 0] - origin[0]) / cell - 0.5
    v = (pos[:, 1] - origin[1]) / cell - 0.5
    iu = np.floor(u).astype(np.int64)
    iv = np.floor(v).astype(np.int64)
    wu = _bspline_weights(u - iu)
    wv = _bspline_weights(v - iv)
    flat = out.reshape(-1, q)
    for a in range(4):
        ii = iu - 1 + a
        for b in range(4):
            jj = iv - 1 + b
            ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
            w = (wu[a] * wv[b])[ok]
            np.add.at(flat, ii[ok] * ny + jj[ok], vals[ok] * w[:, None])
    return out
