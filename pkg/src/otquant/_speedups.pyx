# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: polygon clipping, power-cell construction, grid moments.

Mirrors the semantics of `_reference.py` (the NumPy fallback); the two are
cross-checked in tests/test_backends.py. See that module's docstring for the
shared conventions (CCW polygons, ragged cell layout, sliver/dedup rules).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor, sqrt
from libc.stdint cimport int64_t
from libc.stdlib cimport free, malloc, realloc

cnp.import_array()

NAME = "speedups"

SLIVER_REL = 1e-14
DEDUP_REL = 1e-12

cdef double _SLIVER = 1e-14
cdef double _DEDUP = 1e-12


cdef double _area_c(double* xs, double* ys, int n) noexcept nogil:
    cdef double a = 0.0
    cdef int k, k2
    if n < 3:
        return 0.0
    for k in range(n):
        k2 = k + 1
        if k2 == n:
            k2 = 0
        a += xs[k] * ys[k2] - xs[k2] * ys[k]
    return 0.5 * a


cdef int _clip_c(double* xs, double* ys, int64_t* ls, int n,
                 double a0, double a1, double b, int64_t newlab,
                 double* d, double* ox, double* oy, int64_t* ol) noexcept nogil:
    """Clip by {a.x <= b}; emits at most n+1 vertices with leaving-labels."""
    cdef int k, k2, m = 0, nin = 0
    cdef double t
    cdef int64_t tmp
    for k in range(n):
        d[k] = a0 * xs[k] + a1 * ys[k] - b
        if d[k] <= 0.0:
            nin += 1
    if nin == n:
        for k in range(n):
            ox[k] = xs[k]
            oy[k] = ys[k]
            ol[k] = ls[k]
        return n
    if nin == 0:
        return 0
    for k in range(n):
        k2 = k + 1
        if k2 == n:
            k2 = 0
        if d[k] <= 0.0:
            if d[k2] <= 0.0:
                ox[m] = xs[k2]; oy[m] = ys[k2]; ol[m] = ls[k]; m += 1
            else:
                t = d[k] / (d[k] - d[k2])
                ox[m] = xs[k] + t * (xs[k2] - xs[k])
                oy[m] = ys[k] + t * (ys[k2] - ys[k])
                ol[m] = ls[k]; m += 1
        elif d[k2] <= 0.0:
            t = d[k] / (d[k] - d[k2])
            ox[m] = xs[k] + t * (xs[k2] - xs[k])
            oy[m] = ys[k] + t * (ys[k2] - ys[k])
            ol[m] = newlab; m += 1
            ox[m] = xs[k2]; oy[m] = ys[k2]; ol[m] = ls[k]; m += 1
    # stored labels are in-labels; leaving-label of k is in-label of k+1
    if m > 0:
        tmp = ol[0]
        for k in range(m - 1):
            ol[k] = ol[k + 1]
        ol[m - 1] = tmp
    return m


cdef int _dedup_c(double* xs, double* ys, int64_t* ls, int n, double tol) noexcept nogil:
    cdef int w = 1, k
    cdef double ddx, ddy
    if n == 0:
        return 0
    for k in range(1, n):
        ddx = xs[k] - xs[w - 1]
        ddy = ys[k] - ys[w - 1]
        if sqrt(ddx * ddx + ddy * ddy) < tol:
            ls[w - 1] = ls[k]
        else:
            xs[w] = xs[k]; ys[w] = ys[k]; ls[w] = ls[k]
            w += 1
    if w > 1:
        ddx = xs[w - 1] - xs[0]
        ddy = ys[w - 1] - ys[0]
        if sqrt(ddx * ddx + ddy * ddy) < tol:
            w -= 1
    if w < 3:
        return 0
    return w


def clip_convex(verts, a0, a1, b):
    """Clip a convex CCW polygon by {a.x <= b}; degenerate results are empty."""
    v = np.ascontiguousarray(np.asarray(verts, dtype=np.float64).reshape(-1, 2))
    cdef const double[:, ::1] mv = v
    cdef int n = mv.shape[0]
    if n == 0:
        return np.zeros((0, 2), dtype=np.float64)
    wspan = float(v[:, 0].max() - v[:, 0].min())
    hspan = float(v[:, 1].max() - v[:, 1].min())
    cdef double diag = sqrt(wspan * wspan + hspan * hspan)
    cdef int cap = 2 * n + 8
    cdef double* xs = <double*> malloc(cap * sizeof(double))
    cdef double* ys = <double*> malloc(cap * sizeof(double))
    cdef double* ox = <double*> malloc(cap * sizeof(double))
    cdef double* oy = <double*> malloc(cap * sizeof(double))
    cdef double* d = <double*> malloc(cap * sizeof(double))
    cdef int64_t* ls = <int64_t*> malloc(cap * sizeof(int64_t))
    cdef int64_t* ol = <int64_t*> malloc(cap * sizeof(int64_t))
    if xs == NULL or ys == NULL or ox == NULL or oy == NULL or d == NULL or ls == NULL or ol == NULL:
        free(xs); free(ys); free(ox); free(oy); free(d); free(ls); free(ol)
        raise MemoryError()
    cdef int k, m
    cdef double ref_area, out_area
    cdef double ca0 = a0, ca1 = a1, cb = b
    for k in range(n):
        xs[k] = mv[k, 0]
        ys[k] = mv[k, 1]
        ls[k] = 0
    ref_area = _area_c(xs, ys, n)
    if ref_area < 0.0:
        ref_area = -ref_area
    m = _clip_c(xs, ys, ls, n, ca0, ca1, cb, 0, d, ox, oy, ol)
    m = _dedup_c(ox, oy, ol, m, _DEDUP * diag)
    out_area = _area_c(ox, oy, m)
    if out_area < 0.0:
        out_area = -out_area
    if out_area <= _SLIVER * ref_area:
        m = 0
    out = np.empty((m, 2), dtype=np.float64)
    cdef double[:, ::1] mo = out
    for k in range(m):
        mo[k, 0] = ox[k]
        mo[k, 1] = oy[k]
    free(xs); free(ys); free(ox); free(oy); free(d); free(ls); free(ol)
    return out


cdef struct CellBuf:
    double* ax
    double* ay
    int64_t* al
    double* bx
    double* by
    int64_t* bl
    double* d
    int cap


cdef int _cellbuf_init(CellBuf* cb, int cap) noexcept nogil:
    cb.cap = cap
    cb.ax = <double*> malloc(cap * sizeof(double))
    cb.ay = <double*> malloc(cap * sizeof(double))
    cb.bx = <double*> malloc(cap * sizeof(double))
    cb.by = <double*> malloc(cap * sizeof(double))
    cb.d = <double*> malloc(cap * sizeof(double))
    cb.al = <int64_t*> malloc(cap * sizeof(int64_t))
    cb.bl = <int64_t*> malloc(cap * sizeof(int64_t))
    if (cb.ax == NULL or cb.ay == NULL or cb.bx == NULL or cb.by == NULL
            or cb.d == NULL or cb.al == NULL or cb.bl == NULL):
        return -1
    return 0


cdef void _cellbuf_free(CellBuf* cb) noexcept nogil:
    free(cb.ax); free(cb.ay); free(cb.bx); free(cb.by); free(cb.d)
    free(cb.al); free(cb.bl)


cdef int _cellbuf_grow(CellBuf* cb, int need) noexcept nogil:
    cdef int cap = cb.cap
    while cap < need:
        cap *= 2
    if cap == cb.cap:
        return 0
    cb.ax = <double*> realloc(cb.ax, cap * sizeof(double))
    cb.ay = <double*> realloc(cb.ay, cap * sizeof(double))
    cb.bx = <double*> realloc(cb.bx, cap * sizeof(double))
    cb.by = <double*> realloc(cb.by, cap * sizeof(double))
    cb.d = <double*> realloc(cb.d, cap * sizeof(double))
    cb.al = <int64_t*> realloc(cb.al, cap * sizeof(int64_t))
    cb.bl = <int64_t*> realloc(cb.bl, cap * sizeof(int64_t))
    cb.cap = cap
    if (cb.ax == NULL or cb.ay == NULL or cb.bx == NULL or cb.by == NULL
            or cb.d == NULL or cb.al == NULL or cb.bl == NULL):
        return -1
    return 0


def power_cells(sites, phi, domain):
    """All N power cells intersected with the domain, as ragged arrays.

    Candidate sites are enumerated outward ring by ring over a uniform bucket
    grid; site j cannot cut cell i once ||y_j - y_i|| >= R + sqrt(R^2 + S)
    with R the max vertex distance from y_i and S = max(phi) - phi_i.
    """
    S = np.ascontiguousarray(np.asarray(sites, dtype=np.float64).reshape(-1, 2))
    P = np.ascontiguousarray(np.asarray(phi, dtype=np.float64).reshape(-1))
    D = np.ascontiguousarray(np.asarray(domain, dtype=np.float64).reshape(-1, 2))
    cdef int n = S.shape[0]
    cdef int ndom = D.shape[0]
    offsets = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] off = offsets
    if n == 0:
        return np.zeros((0, 2)), offsets, np.zeros(0, dtype=np.int64)

    cdef int G = <int> sqrt(n / 2.0)
    if G < 1:
        G = 1
    xmin_s = float(S[:, 0].min())
    ymin_s = float(S[:, 1].min())
    xmax_s = float(S[:, 0].max())
    ymax_s = float(S[:, 1].max())
    cdef double bx0 = xmin_s, by0 = ymin_s
    cdef double bw = (xmax_s - xmin_s) / G, bh = (ymax_s - ymin_s) / G
    if bw <= 0.0:
        bw = 1.0
    if bh <= 0.0:
        bh = 1.0
    bxi = np.clip(((S[:, 0] - bx0) / bw).astype(np.int64), 0, G - 1)
    byi = np.clip(((S[:, 1] - by0) / bh).astype(np.int64), 0, G - 1)
    bid = bxi * G + byi
    order_np = np.argsort(bid, kind="stable").astype(np.int64)
    starts_np = np.searchsorted(bid[order_np], np.arange(G * G + 1)).astype(np.int64)
    cdef const int64_t[::1] order = order_np
    cdef const int64_t[::1] bstart = starts_np
    cdef const double[:, ::1] sv = S
    cdef const double[::1] pv = P
    cdef const double[:, ::1] dv = D

    cdef double dom_area = abs(float(_area_np(D)))
    cdef double wspan = float(D[:, 0].max() - D[:, 0].min()) if ndom else 0.0
    cdef double hspan = float(D[:, 1].max() - D[:, 1].min()) if ndom else 0.0
    cdef double dom_diag = sqrt(wspan * wspan + hspan * hspan)
    cdef double phimax = float(P.max())

    cdef CellBuf cb
    if _cellbuf_init(&cb, ndom + 80) != 0:
        raise MemoryError()
    cdef long gcap = 8 * n + ndom + 64
    cdef double* gx = <double*> malloc(gcap * sizeof(double))
    cdef double* gy = <double*> malloc(gcap * sizeof(double))
    cdef int64_t* gl = <int64_t*> malloc(gcap * sizeof(int64_t))
    if gx == NULL or gy == NULL or gl == NULL:
        _cellbuf_free(&cb)
        free(gx); free(gy); free(gl)
        raise MemoryError()

    cdef long total = 0
    cdef int err = 0
    cdef int i, k, m, m2, r, done, bi, bj, ci, cj, maxring
    cdef int64_t j, b0, b1, idx
    cdef double yix, yiy, phii, s_i, r2, rr, stop, dmin
    cdef double d2, u, a0, a1, bb, relx, rely, car
    cdef double dedup_tol = _DEDUP * dom_diag
    cdef double minside = bw if bw < bh else bh
    cdef double* tmpp
    cdef int64_t* tmpl

    with nogil:
        for i in range(n):
            if err:
                break
            m = ndom
            if _cellbuf_grow(&cb, m + 4) != 0:
                err = 2
                break
            for k in range(ndom):
                cb.ax[k] = dv[k, 0]
                cb.ay[k] = dv[k, 1]
                cb.al[k] = -1 - k
            yix = sv[i, 0]; yiy = sv[i, 1]
            phii = pv[i]
            s_i = phimax - phii
            if s_i < 0.0:
                s_i = 0.0
            r2 = 0.0
            for k in range(m):
                relx = cb.ax[k] - yix
                rely = cb.ay[k] - yiy
                car = relx * relx + rely * rely
                if car > r2:
                    r2 = car
            bi = <int> ((yix - bx0) / bw)
            if bi < 0: bi = 0
            if bi > G - 1: bi = G - 1
            bj = <int> ((yiy - by0) / bh)
            if bj < 0: bj = 0
            if bj > G - 1: bj = G - 1
            maxring = bi
            if G - 1 - bi > maxring: maxring = G - 1 - bi
            if bj > maxring: maxring = bj
            if G - 1 - bj > maxring: maxring = G - 1 - bj
            done = 0
            if n > 1:
                for r in range(0, maxring + 1):
                    if done:
                        break
                    if r > 0:
                        rr = sqrt(r2)
                        stop = rr + sqrt(r2 + s_i)
                        dmin = (r - 1) * minside
                        if dmin >= stop:
                            break
                    for ci in range(bi - r, bi + r + 1):
                        if done or ci < 0 or ci >= G:
                            continue
                        for cj in range(bj - r, bj + r + 1):
                            if done or cj < 0 or cj >= G:
                                continue
                            if r > 0 and ci != bi - r and ci != bi + r and cj != bj - r and cj != bj + r:
                                continue
                            b0 = bstart[ci * G + cj]
                            b1 = bstart[ci * G + cj + 1]
                            for idx in range(b0, b1):
                                j = order[idx]
                                if j == i:
                                    continue
                                relx = sv[j, 0] - yix
                                rely = sv[j, 1] - yiy
                                d2 = relx * relx + rely * rely
                                if d2 <= 0.0:
                                    err = 1
                                    done = 1
                                    break
                                u = d2 + phii - pv[j]
                                if u >= 0.0 and u * u >= 4.0 * r2 * d2:
                                    continue
                                a0 = 2.0 * relx
                                a1 = 2.0 * rely
                                bb = (sv[j, 0] * sv[j, 0] + sv[j, 1] * sv[j, 1]
                                      - yix * yix - yiy * yiy - pv[j] + phii)
                                if _cellbuf_grow(&cb, m + 4) != 0:
                                    err = 2
                                    done = 1
                                    break
                                m2 = _clip_c(cb.ax, cb.ay, cb.al, m, a0, a1, bb, j,
                                             cb.d, cb.bx, cb.by, cb.bl)
                                m2 = _dedup_c(cb.bx, cb.by, cb.bl, m2, dedup_tol)
                                tmpp = cb.ax; cb.ax = cb.bx; cb.bx = tmpp
                                tmpp = cb.ay; cb.ay = cb.by; cb.by = tmpp
                                tmpl = cb.al; cb.al = cb.bl; cb.bl = tmpl
                                m = m2
                                if m == 0:
                                    done = 1
                                    break
                                r2 = 0.0
                                for k in range(m):
                                    relx = cb.ax[k] - yix
                                    rely = cb.ay[k] - yiy
                                    car = relx * relx + rely * rely
                                    if car > r2:
                                        r2 = car
            if err:
                break
            if m > 0:
                car = _area_c(cb.ax, cb.ay, m)
                if car < 0.0:
                    car = -car
                if car <= _SLIVER * dom_area:
                    m = 0
            if total + m > gcap:
                while total + m > gcap:
                    gcap *= 2
                gx = <double*> realloc(gx, gcap * sizeof(double))
                gy = <double*> realloc(gy, gcap * sizeof(double))
                gl = <int64_t*> realloc(gl, gcap * sizeof(int64_t))
                if gx == NULL or gy == NULL or gl == NULL:
                    err = 2
                    break
            for k in range(m):
                gx[total + k] = cb.ax[k]
                gy[total + k] = cb.ay[k]
                gl[total + k] = cb.al[k]
            total += m
            off[i + 1] = total

    _cellbuf_free(&cb)
    if err:
        free(gx); free(gy); free(gl)
        if err == 1:
            raise ValueError("coincident sites")
        raise MemoryError()
    verts = np.empty((total, 2), dtype=np.float64)
    labels = np.empty(total, dtype=np.int64)
    cdef double[:, ::1] vo = verts
    cdef int64_t[::1] lo = labels
    cdef long q
    with nogil:
        for q in range(total):
            vo[q, 0] = gx[q]
            vo[q, 1] = gy[q]
            lo[q] = gl[q]
    free(gx); free(gy); free(gl)
    return verts, offsets, labels


def _area_np(verts):
    v = np.asarray(verts, dtype=np.float64).reshape(-1, 2)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * y2 - x2 * y))


cdef inline void _kadd(double* acc, double* comp, int idx, double val) noexcept nogil:
    cdef double y = val - comp[idx]
    cdef double t = acc[idx] + y
    comp[idx] = (t - acc[idx]) - y
    acc[idx] = t


cdef void _green_c(double* xs, double* ys, int n, double* out4) noexcept nogil:
    cdef double a = 0.0, ix = 0.0, iy = 0.0, i2 = 0.0, cr
    cdef int k, k2
    out4[0] = 0.0; out4[1] = 0.0; out4[2] = 0.0; out4[3] = 0.0
    if n < 3:
        return
    for k in range(n):
        k2 = k + 1
        if k2 == n:
            k2 = 0
        cr = xs[k] * ys[k2] - xs[k2] * ys[k]
        a += cr
        ix += (xs[k] + xs[k2]) * cr
        iy += (ys[k] + ys[k2]) * cr
        i2 += (xs[k] * xs[k] + xs[k] * xs[k2] + xs[k2] * xs[k2]
               + ys[k] * ys[k] + ys[k] * ys[k2] + ys[k2] * ys[k2]) * cr
    out4[0] = a / 2.0
    out4[1] = ix / 6.0
    out4[2] = iy / 6.0
    out4[3] = i2 / 12.0


cdef int _extent_c(double* xs, double* ys, int n, double yq,
                   double* lo, double* hi) noexcept nogil:
    cdef int k, k2, found = 0
    cdef double dp, dq, t, x
    for k in range(n):
        k2 = k + 1
        if k2 == n:
            k2 = 0
        dp = ys[k] - yq
        dq = ys[k2] - yq
        if dp * dq > 0.0:
            continue
        if ys[k] == ys[k2]:
            if not found:
                lo[0] = xs[k]; hi[0] = xs[k]
                found = 1
            if xs[k] < lo[0]: lo[0] = xs[k]
            if xs[k] > hi[0]: hi[0] = xs[k]
            if xs[k2] < lo[0]: lo[0] = xs[k2]
            if xs[k2] > hi[0]: hi[0] = xs[k2]
        else:
            t = dp / (ys[k] - ys[k2])
            x = xs[k] + t * (xs[k2] - xs[k])
            if not found:
                lo[0] = x; hi[0] = x
                found = 1
            if x < lo[0]: lo[0] = x
            if x > hi[0]: hi[0] = x
    return found


cdef void _poly_moments_c(double* vx, double* vy, int n,
                          const double[:, ::1] values,
                          double x0, double y0, double dx, double dy,
                          const double[:, ::1] ps0, const double[:, ::1] ps1,
                          const double[:, ::1] ps2,
                          double* sx, double* sy, double* px, double* py,
                          double* qx, double* qy, double* dbuf,
                          int64_t* lbuf, int64_t* lbuf2,
                          double* out4) noexcept nogil:
    cdef int h = values.shape[0]
    cdef int w = values.shape[1]
    cdef double acc[4]
    cdef double comp[4]
    cdef double g4[4]
    cdef int k, r, c, r0, r1, m, mp, c_lo, c_hi, cf0, cf1, has_lo, has_hi
    cdef double ymin, ymax, yb0, yb1, sxmin, sxmax
    cdef double lo0, hi0, lo1, hi1, lcov, rcov
    cdef double s0, s1, s2, xc0, yc, sxm, sxx, cellsz, v
    cdef double pixel_term = (dx * dx + dy * dy) / 12.0
    for k in range(4):
        acc[k] = 0.0
        comp[k] = 0.0
        out4[k] = 0.0
    if n < 3:
        return
    ymin = vy[0]; ymax = vy[0]
    for k in range(n):
        if vy[k] < ymin: ymin = vy[k]
        if vy[k] > ymax: ymax = vy[k]
    r0 = <int> floor((ymin - y0) / dy)
    r1 = <int> ceil((ymax - y0) / dy) - 1
    if r0 < 0: r0 = 0
    if r0 > h - 1: r0 = h - 1
    if r1 < 0: r1 = 0
    if r1 > h - 1: r1 = h - 1
    for r in range(r0, r1 + 1):
        yb0 = y0 + r * dy
        yb1 = y0 + (r + 1) * dy
        for k in range(n):
            lbuf[k] = 0
        m = _clip_c(vx, vy, lbuf, n, 0.0, 1.0, yb1, 0, dbuf, sx, sy, lbuf2)
        if m == 0:
            continue
        m = _clip_c(sx, sy, lbuf2, m, 0.0, -1.0, -yb0, 0, dbuf, px, py, lbuf)
        if m < 3:
            continue
        # px/py now hold the strip
        sxmin = px[0]; sxmax = px[0]
        for k in range(m):
            if px[k] < sxmin: sxmin = px[k]
            if px[k] > sxmax: sxmax = px[k]
        c_lo = <int> floor((sxmin - x0) / dx)
        if c_lo < 0: c_lo = 0
        if c_lo > w - 1: c_lo = w - 1
        c_hi = <int> ceil((sxmax - x0) / dx) - 1
        if c_hi < c_lo: c_hi = c_lo
        if c_hi > w - 1: c_hi = w - 1
        has_lo = _extent_c(px, py, m, yb0, &lo0, &hi0)
        has_hi = _extent_c(px, py, m, yb1, &lo1, &hi1)
        cf0 = 0
        cf1 = -1
        if has_lo and has_hi:
            lcov = lo0 if lo0 > lo1 else lo1
            rcov = hi0 if hi0 < hi1 else hi1
            cf0 = <int> ceil((lcov - x0) / dx)
            if cf0 < c_lo: cf0 = c_lo
            cf1 = <int> floor((rcov - x0) / dx) - 1
            if cf1 > c_hi: cf1 = c_hi
        if cf0 <= cf1:
            s0 = ps0[r, cf1 + 1] - ps0[r, cf0]
            s1 = ps1[r, cf1 + 1] - ps1[r, cf0]
            s2 = ps2[r, cf1 + 1] - ps2[r, cf0]
            xc0 = x0 + 0.5 * dx
            yc = yb0 + 0.5 * dy
            sxm = xc0 * s0 + dx * s1
            sxx = xc0 * xc0 * s0 + 2.0 * xc0 * dx * s1 + dx * dx * s2
            cellsz = dx * dy
            _kadd(acc, comp, 0, cellsz * s0)
            _kadd(acc, comp, 1, cellsz * sxm)
            _kadd(acc, comp, 2, cellsz * yc * s0)
            _kadd(acc, comp, 3, cellsz * (sxx + yc * yc * s0 + pixel_term * s0))
        for c in range(c_lo, c_hi + 1):
            if cf0 <= cf1 and cf0 <= c and c <= cf1:
                continue
            v = values[r, c]
            if v == 0.0:
                continue
            for k in range(m):
                lbuf[k] = 0
            mp = _clip_c(px, py, lbuf, m, 1.0, 0.0, x0 + (c + 1) * dx, 0, dbuf, qx, qy, lbuf2)
            if mp == 0:
                continue
            mp = _clip_c(qx, qy, lbuf2, mp, -1.0, 0.0, -(x0 + c * dx), 0, dbuf, sx, sy, lbuf)
            if mp < 3:
                continue
            _green_c(sx, sy, mp, g4)
            for k in range(4):
                _kadd(acc, comp, k, v * g4[k])
    for k in range(4):
        out4[k] = acc[k]


def cells_grid_moments(verts, offsets, values, x0, y0, dx, dy, ps0, ps1, ps2):
    """(mass, int x, int y, int |x|^2) of the density over each ragged cell."""
    V = np.ascontiguousarray(np.asarray(verts, dtype=np.float64).reshape(-1, 2))
    O = np.ascontiguousarray(np.asarray(offsets, dtype=np.int64))
    cdef const double[:, ::1] val = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[:, ::1] p0 = np.ascontiguousarray(ps0, dtype=np.float64)
    cdef const double[:, ::1] p1 = np.ascontiguousarray(ps1, dtype=np.float64)
    cdef const double[:, ::1] p2 = np.ascontiguousarray(ps2, dtype=np.float64)
    cdef int n = len(O) - 1
    out = np.zeros((n, 4), dtype=np.float64)
    cdef double[:, ::1] mo = out
    cdef const int64_t[::1] ov = O
    cdef const double[:, ::1] vv = V
    cdef int maxk = 8
    cdef int i, sz, k
    for i in range(n):
        sz = <int> (ov[i + 1] - ov[i])
        if sz + 8 > maxk:
            maxk = sz + 8
    cdef int cap = 2 * maxk + 8
    cdef double* bufs = <double*> malloc(9 * cap * sizeof(double))
    cdef int64_t* lbuf = <int64_t*> malloc(2 * cap * sizeof(int64_t))
    if bufs == NULL or lbuf == NULL:
        free(bufs); free(lbuf)
        raise MemoryError()
    cdef double* cvx = bufs
    cdef double* cvy = bufs + cap
    cdef double* sx = bufs + 2 * cap
    cdef double* sy = bufs + 3 * cap
    cdef double* px = bufs + 4 * cap
    cdef double* py = bufs + 5 * cap
    cdef double* qx = bufs + 6 * cap
    cdef double* qy = bufs + 7 * cap
    cdef double* dbuf = bufs + 8 * cap
    cdef int64_t* lbuf2 = lbuf + cap
    cdef double cx0 = x0, cy0 = y0, cdx = dx, cdy = dy
    cdef double out4[4]
    cdef int64_t s
    with nogil:
        for i in range(n):
            s = ov[i]
            sz = <int> (ov[i + 1] - s)
            for k in range(sz):
                cvx[k] = vv[s + k, 0]
                cvy[k] = vv[s + k, 1]
            _poly_moments_c(cvx, cvy, sz, val, cx0, cy0, cdx, cdy, p0, p1, p2,
                            sx, sy, px, py, qx, qy, dbuf, lbuf, lbuf2, out4)
            for k in range(4):
                mo[i, k] = out4[k]
    free(bufs); free(lbuf)
    return out


def segment_density_integrals(segs, values, x0, y0, dx, dy):
    """Line integral of the grid density along each segment (x1,y1,x2,y2).

    Subdivides at every gridline crossing; each piece contributes
    length x mean of the two pixel values adjacent to the piece.
    """
    SG = np.ascontiguousarray(np.asarray(segs, dtype=np.float64).reshape(-1, 4))
    cdef const double[:, ::1] val = np.ascontiguousarray(values, dtype=np.float64)
    cdef int h = val.shape[0]
    cdef int w = val.shape[1]
    cdef int p = SG.shape[0]
    out = np.zeros(p, dtype=np.float64)
    cdef double[::1] mo = out
    cdef const double[:, ::1] sg = SG
    cdef int cap = w + h + 16
    cdef double* ts = <double*> malloc(4 * cap * sizeof(double))
    if ts == NULL:
        raise MemoryError()
    cdef double* tv = ts + 2 * cap
    cdef double* th = ts + 3 * cap
    cdef double cx0 = x0, cy0 = y0, cdx = dx, cdy = dy
    cdef int k, nv, nh, nt, c, iv, ih, cidx, ridx, pc
    cdef double x1, y1, x2, y2, length, t, total
    cdef double nxv, nyv, t0, t1, tm, xm, ym, vsum, xg, yg
    cdef double nudge = 1e-6 * (cdx if cdx < cdy else cdy)
    cdef int clo, chi
    with nogil:
        for k in range(p):
            x1 = sg[k, 0]; y1 = sg[k, 1]; x2 = sg[k, 2]; y2 = sg[k, 3]
            length = sqrt((x2 - x1) * (x2 - x1) + (y2 - y1) * (y2 - y1))
            if length == 0.0:
                mo[k] = 0.0
                continue
            nv = 0
            if x2 > x1:
                clo = <int> ceil((x1 - cx0) / cdx)
                chi = <int> floor((x2 - cx0) / cdx)
                for c in range(clo, chi + 1):
                    t = (cx0 + c * cdx - x1) / (x2 - x1)
                    if 0.0 < t < 1.0:
                        tv[nv] = t
                        nv += 1
            elif x1 > x2:
                clo = <int> floor((x1 - cx0) / cdx)
                chi = <int> ceil((x2 - cx0) / cdx)
                for c in range(clo, chi - 1, -1):
                    t = (cx0 + c * cdx - x1) / (x2 - x1)
                    if 0.0 < t < 1.0:
                        tv[nv] = t
                        nv += 1
            nh = 0
            if y2 > y1:
                clo = <int> ceil((y1 - cy0) / cdy)
                chi = <int> floor((y2 - cy0) / cdy)
                for c in range(clo, chi + 1):
                    t = (cy0 + c * cdy - y1) / (y2 - y1)
                    if 0.0 < t < 1.0:
                        th[nh] = t
                        nh += 1
            elif y1 > y2:
                clo = <int> floor((y1 - cy0) / cdy)
                chi = <int> ceil((y2 - cy0) / cdy)
                for c in range(clo, chi - 1, -1):
                    t = (cy0 + c * cdy - y1) / (y2 - y1)
                    if 0.0 < t < 1.0:
                        th[nh] = t
                        nh += 1
            # merge the two ascending lists with the endpoints
            nt = 1
            ts[0] = 0.0
            iv = 0
            ih = 0
            while iv < nv or ih < nh:
                if ih >= nh or (iv < nv and tv[iv] <= th[ih]):
                    t = tv[iv]
                    iv += 1
                else:
                    t = th[ih]
                    ih += 1
                if t > ts[nt - 1]:
                    ts[nt] = t
                    nt += 1
            if ts[nt - 1] < 1.0:
                ts[nt] = 1.0
                nt += 1
            nxv = (y1 - y2) / length
            nyv = (x2 - x1) / length
            total = 0.0
            for pc in range(nt - 1):
                t0 = ts[pc]
                t1 = ts[pc + 1]
                if t1 <= t0:
                    continue
                tm = 0.5 * (t0 + t1)
                xm = x1 + tm * (x2 - x1)
                ym = y1 + tm * (y2 - y1)
                vsum = 0.0
                xg = xm + nudge * nxv
                yg = ym + nudge * nyv
                cidx = <int> floor((xg - cx0) / cdx)
                ridx = <int> floor((yg - cy0) / cdy)
                if cidx < 0: cidx = 0
                if cidx > w - 1: cidx = w - 1
                if ridx < 0: ridx = 0
                if ridx > h - 1: ridx = h - 1
                vsum += val[ridx, cidx]
                xg = xm - nudge * nxv
                yg = ym - nudge * nyv
                cidx = <int> floor((xg - cx0) / cdx)
                ridx = <int> floor((yg - cy0) / cdy)
                if cidx < 0: cidx = 0
                if cidx > w - 1: cidx = w - 1
                if ridx < 0: ridx = 0
                if ridx > h - 1: ridx = h - 1
                vsum += val[ridx, cidx]
                total += (t1 - t0) * length * 0.5 * vsum
            mo[k] = total
    free(ts)
    return out
