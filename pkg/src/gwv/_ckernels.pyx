# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_fallback`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, floor

cnp.import_array()


cdef double _tree(const double[::1] v, Py_ssize_t lo, Py_ssize_t width, Py_ssize_t n) noexcept nogil:
    # sum of the aligned block [lo, lo + width) padded with zeros past n; same tree as the level sweep
    cdef Py_ssize_t half
    if width == 1:
        return v[lo]
    if width == 8 and lo + 8 <= n:
        return (((v[lo] + v[lo + 1]) + (v[lo + 2] + v[lo + 3]))
                + ((v[lo + 4] + v[lo + 5]) + (v[lo + 6] + v[lo + 7])))
    half = width // 2
    if lo + half >= n:
        return _tree(v, lo, half, n) + 0.0
    return _tree(v, lo, half, n) + _tree(v, lo + half, half, n)


def pairwise_sum(a):
    cdef const double[::1] v = np.ascontiguousarray(a, dtype=np.float64).ravel()
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t width = 1
    cdef double out
    if n == 0:
        return 0.0
    while width < n:
        width *= 2
    with nogil:
        out = _tree(v, 0, width, n)
    return float(out)


def bump_rows(x, centers, radii):
    cdef const double[:, ::1] X = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] C = np.ascontiguousarray(centers, dtype=np.float64)
    cdef const double[::1] R = np.ascontiguousarray(radii, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = C.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order_arr = np.argsort(np.asarray(X)[:, 0], kind="stable").astype(np.int64) if n else np.zeros(0, np.int64)
    cdef long long[::1] order = order_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs_arr = np.asarray(X)[order_arr, 0] if n else np.zeros(0)
    cdef double[::1] xs = xs_arr
    cdef Py_ssize_t j, a, b, k, cnt = 0, lo, hi, mid, pos
    cdef double dx, dy, s, r2
    # first pass: count
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts_arr = np.zeros(m, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] los_arr = np.zeros(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] his_arr = np.zeros(m, dtype=np.int64)
    cdef long long[::1] los = los_arr
    cdef long long[::1] his = his_arr
    with nogil:
        for j in range(m):
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) // 2
                if xs[mid] < C[j, 0] - R[j]:
                    lo = mid + 1
                else:
                    hi = mid
            a = lo
            lo = a
            hi = n
            while lo < hi:
                mid = (lo + hi) // 2
                if xs[mid] <= C[j, 0] + R[j]:
                    lo = mid + 1
                else:
                    hi = mid
            b = lo
            los[j] = a
            his[j] = b
            r2 = R[j] * R[j]
            for k in range(a, b):
                dx = X[order[k], 0] - C[j, 0]
                dy = X[order[k], 1] - C[j, 1]
                s = (dx * dx + dy * dy) / r2
                if s < 1.0:
                    counts[j] += 1
            cnt += counts[j]
    rows_arr = np.empty(cnt, dtype=np.int64)
    cols_arr = np.empty(cnt, dtype=np.int64)
    cdef long long[::1] rows = rows_arr
    cdef long long[::1] cols = cols_arr
    pos = 0
    with nogil:
        for j in range(m):
            r2 = R[j] * R[j]
            for k in range(los[j], his[j]):
                dx = X[order[k], 0] - C[j, 0]
                dy = X[order[k], 1] - C[j, 1]
                s = (dx * dx + dy * dy) / r2
                if s < 1.0:
                    rows[pos] = j
                    cols[pos] = order[k]
                    pos += 1
    # particle order within each row
    start = 0
    for j in range(m):
        c = counts[j]
        if c > 1:
            cols_arr[start:start + c] = np.sort(cols_arr[start:start + c])
        start += c
    cdef Py_ssize_t t
    b_arr = np.empty(cnt)
    gx_arr = np.empty(cnt)
    gy_arr = np.empty(cnt)
    cdef double[::1] B = b_arr
    cdef double[::1] GX = gx_arr
    cdef double[::1] GY = gy_arr
    cdef double om, g
    with nogil:
        for t in range(cnt):
            j = rows[t]
            k = cols[t]
            dx = X[k, 0] - C[j, 0]
            dy = X[k, 1] - C[j, 1]
            r2 = R[j] * R[j]
            s = (dx * dx + dy * dy) / r2
            om = 1.0 - s
            B[t] = om * om * om
            g = -6.0 * om * om / r2
            GX[t] = g * dx
            GY[t] = g * dy
    return rows_arr, cols_arr, b_arr, gx_arr, gy_arr


def winding_numbers(points, verts):
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cdef const double[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0], m = V.shape[0]
    out_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t i, e, f
    cdef double px, py, ax, ay, bx, by, cr
    cdef long long w
    with nogil:
        for i in range(n):
            px = P[i, 0]
            py = P[i, 1]
            w = 0
            for e in range(m):
                f = e + 1
                if f == m:
                    f = 0
                ax = V[e, 0]
                ay = V[e, 1]
                bx = V[f, 0]
                by = V[f, 1]
                if ay <= py:
                    if by > py:
                        cr = (bx - ax) * (py - ay) - (px - ax) * (by - ay)
                        if cr > 0:
                            w += 1
                else:
                    if by <= py:
                        cr = (bx - ax) * (py - ay) - (px - ax) * (by - ay)
                        if cr < 0:
                            w -= 1
            out[i] = w
    return out_arr


def crossing_count(sa, sb, double sin_tol):
    cdef const double[:, ::1] A = np.ascontiguousarray(sa, dtype=np.float64).reshape(-1, 4)
    cdef const double[:, ::1] B = np.ascontiguousarray(sb, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0], i, j
    cdef long long total = 0
    cdef double ax0, ay0, dx, dy, la, bx0, by0, ex, ey, lb, o1, o2, o3, o4, cr
    cdef double aminx, amaxx, aminy, amaxy
    with nogil:
        for i in range(na):
            ax0 = A[i, 0]
            ay0 = A[i, 1]
            dx = A[i, 2] - ax0
            dy = A[i, 3] - ay0
            la = sqrt(dx * dx + dy * dy)
            aminx = ax0 if dx > 0 else ax0 + dx
            amaxx = ax0 + dx if dx > 0 else ax0
            aminy = ay0 if dy > 0 else ay0 + dy
            amaxy = ay0 + dy if dy > 0 else ay0
            for j in range(nb):
                bx0 = B[j, 0]
                by0 = B[j, 1]
                ex = B[j, 2] - bx0
                ey = B[j, 3] - by0
                if (bx0 < aminx and bx0 + ex < aminx) or (bx0 > amaxx and bx0 + ex > amaxx):
                    continue
                if (by0 < aminy and by0 + ey < aminy) or (by0 > amaxy and by0 + ey > amaxy):
                    continue
                lb = sqrt(ex * ex + ey * ey)
                o1 = dx * (by0 - ay0) - dy * (bx0 - ax0)
                o2 = dx * (B[j, 3] - ay0) - dy * (B[j, 2] - ax0)
                o3 = ex * (ay0 - by0) - ey * (ax0 - bx0)
                o4 = ex * (A[i, 3] - by0) - ey * (A[i, 2] - bx0)
                cr = fabs(dx * ey - dy * ex)
                if o1 * o2 < 0 and o3 * o4 < 0 and cr > sin_tol * la * lb:
                    total += 1
    return int(total)


def min_distance(points, segs):
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cdef const double[:, ::1] S = np.ascontiguousarray(segs, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = P.shape[0], m = S.shape[0], i, j
    out_arr = np.full(n, np.inf)
    cdef double[::1] out = out_arr
    cdef double px, py, ax, ay, dx, dy, ll, t, qx, qy, d2, best
    if m == 0:
        return out_arr
    with nogil:
        for i in range(n):
            px = P[i, 0]
            py = P[i, 1]
            best = 1e300
            for j in range(m):
                ax = S[j, 0]
                ay = S[j, 1]
                dx = S[j, 2] - ax
                dy = S[j, 3] - ay
                ll = dx * dx + dy * dy
                if ll > 0:
                    t = ((px - ax) * dx + (py - ay) * dy) / ll
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                else:
                    t = 0.0
                qx = ax + t * dx - px
                qy = ay + t * dy - py
                d2 = qx * qx + qy * qy
                if d2 < best:
                    best = d2
            out[i] = sqrt(best)
    return out_arr


def bspline_scatter(pos, vals, origin, double cell, Py_ssize_t nx, Py_ssize_t ny):
    cdef const double[:, ::1] P = np.ascontiguousarray(pos, dtype=np.float64).reshape(-1, 2)
    varr = np.ascontiguousarray(vals, dtype=np.float64)
    if varr.ndim == 1:
        varr = varr[:, None]
    cdef const double[:, ::1] Vv = np.ascontiguousarray(varr)
    cdef Py_ssize_t n = P.shape[0], q = Vv.shape[1]
    out_arr = np.zeros((nx, ny, q))
    cdef double[:, :, ::1] out = out_arr
    cdef double ox = origin[0], oy = origin[1]
    cdef Py_ssize_t k, a, b, c, ii, jj
    cdef long long iu, iv
    cdef double u, v, f, g, w
    cdef double wu[4]
    cdef double wv[4]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] WU_arr = np.empty((n, 4))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] WV_arr = np.empty((n, 4))
    cdef double[:, ::1] WU = WU_arr
    cdef double[:, ::1] WV = WV_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] IU_arr = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] IV_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] IU = IU_arr
    cdef long long[::1] IV = IV_arr
    with nogil:
        for k in range(n):
            u = (P[k, 0] - ox) / cell - 0.5
            v = (P[k, 1] - oy) / cell - 0.5
            iu = <long long>floor(u)
            iv = <long long>floor(v)
            IU[k] = iu
            IV[k] = iv
            f = u - iu
            g = 1.0 - f
            WU[k, 0] = g * g * g / 6.0
            WU[k, 1] = (3.0 * f * f * f - 6.0 * f * f + 4.0) / 6.0
            WU[k, 2] = (-3.0 * f * f * f + 3.0 * f * f + 3.0 * f + 1.0) / 6.0
            WU[k, 3] = f * f * f / 6.0
            f = v - iv
            g = 1.0 - f
            WV[k, 0] = g * g * g / 6.0
            WV[k, 1] = (3.0 * f * f * f - 6.0 * f * f + 4.0) / 6.0
            WV[k, 2] = (-3.0 * f * f * f + 3.0 * f * f + 3.0 * f + 1.0) / 6.0
            WV[k, 3] = f * f * f / 6.0
        for a in range(4):
            for b in range(4):
                for k in range(n):
                    ii = IU[k] - 1 + a
                    jj = IV[k] - 1 + b
                    if ii < 0 or ii >= nx or jj < 0 or jj >= ny:
                        continue
                    w = WU[k, a] * WV[k, b]
                    for c in range(q):
                        out[ii, jj, c] += Vv[k, c] * w
    return out_arr
