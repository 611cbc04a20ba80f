# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Lax-Oleinik kernels; same contract as ``twistkam._kernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, fabs, INFINITY, M_PI

from twistkam._kernels import WindowExhaustedError

cnp.import_array()

cdef double TIE_TOL = 1e-12


cdef inline long wrap(long j, long n) nogil:
    cdef long r = j % n
    return r + n if r < 0 else r


cdef inline double pot(double z, double v0, const double[::1] co, int order) nogil:
    cdef double out = v0 if order == 0 else 0.0
    cdef double w
    cdef Py_ssize_t k
    for k in range(co.shape[0]):
        w = 2.0 * M_PI * (k + 1)
        if order == 0:
            out += co[k] * cos(w * z)
        elif order == 1:
            out -= co[k] * w * sin(w * z)
        else:
            out -= co[k] * w * w * cos(w * z)
    return out


cdef inline double node_cost(const double[::1] h, long i, long j, long n,
                             double q, double b) nogil:
    cdef double d = <double>(j - i) / n
    return h[wrap(j, n)] + (0.5 * q * d + b) * d


cdef void dc(const double[::1] h, long[::1] jstar, long rlo, long rhi,
             long jlo, long jhi, long n, long M, double q, double b) nogil:
    cdef long mid, a, e, j, best_j
    cdef double best, v
    while rlo <= rhi:
        mid = (rlo + rhi) // 2
        a = jlo if jlo > mid - M else mid - M
        e = jhi if jhi < mid + M else mid + M
        best = INFINITY
        best_j = a
        for j in range(a, e + 1):
            v = node_cost(h, mid, j, n, q, b)
            if v < best:
                best = v
                best_j = j
        jstar[mid] = best_j
        # recurse on the smaller half, loop on the larger
        if mid - rlo < rhi - mid:
            dc(h, jstar, rlo, mid - 1, jlo, best_j, n, M, q, b)
            rlo = mid + 1
            jlo = best_j
        else:
            dc(h, jstar, mid + 1, rhi, best_j, jhi, n, M, q, b)
            rhi = mid - 1
            jhi = best_j


cdef inline void cell_min(const double[::1] g, long n, long j, double s, double q,
                          double b, double v0, const double[::1] co, int use_pot,
                          double *val, double *zout) nogil:
    cdef double a = <double>j / n
    cdef double hi = <double>(j + 1) / n
    cdef double gj = g[wrap(j, n)]
    cdef double slope = (g[wrap(j + 1, n)] - gj) * n
    cdef double dlo, dhi, z, zl, zh, dz, curv, zn, root, d, v
    cdef int it
    cdef int with_pot = use_pot and co.shape[0] > 0

    dlo = slope + q * (a - s) + b
    dhi = slope + q * (hi - s) + b
    if use_pot:
        dlo += pot(a, v0, co, 1)
        dhi += pot(hi, v0, co, 1)

    # candidate: left endpoint
    d = a - s
    val[0] = gj + (0.5 * q * d + b) * d + (pot(a, v0, co, 0) if use_pot else 0.0)
    zout[0] = a

    if dlo < 0 and dhi > 0:
        if with_pot:
            zl = a
            zh = hi
            z = 0.5 * (a + hi)
            for it in range(60):
                dz = slope + q * (z - s) + b + pot(z, v0, co, 1)
                if dz < 0:
                    zl = z
                elif dz > 0:
                    zh = z
                curv = q + pot(z, v0, co, 2)
                zn = z - dz / curv if curv != 0 else 0.5 * (zl + zh)
                if not (zn > zl and zn < zh):
                    zn = 0.5 * (zl + zh)
                if fabs(zn - z) <= 1e-15 or zh - zl <= 1e-15:
                    z = zn
                    break
                z = zn
            root = z
        else:
            root = s - (slope + b) / q
        if root < a:
            root = a
        if root > hi:
            root = hi
        d = root - s
        v = gj + slope * (root - a) + (0.5 * q * d + b) * d
        if use_pot:
            v += pot(root, v0, co, 0)
        if v < val[0] - TIE_TOL or (fabs(v - val[0]) <= TIE_TOL and root < zout[0]):
            val[0] = v
            zout[0] = root

    d = hi - s
    v = gj + slope * (hi - a) + (0.5 * q * d + b) * d
    if use_pot:
        v += pot(hi, v0, co, 0)
    if v < val[0] - TIE_TOL:
        val[0] = v
        zout[0] = hi


def discrete_argmin(h, double q, double b, long M):
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef long n = hv.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef long[::1] js = out
    with nogil:
        dc(hv, js, 0, n - 1, -M, n - 1 + M, n, M, q, b)
    return out


def refine(g, jstar, double q, double b, double v0, coeffs, bint use_pot):
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef const long[::1] js = np.ascontiguousarray(jstar, dtype=np.int64)
    cdef const double[::1] co = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef long n = gv.shape[0]
    F = np.empty(n)
    Z = np.empty(n)
    cdef double[::1] Fv = F
    cdef double[::1] Zv = Z
    cdef long i
    cdef double s, v1, z1, v2, z2
    with nogil:
        for i in range(n):
            s = <double>i / n
            cell_min(gv, n, js[i] - 1, s, q, b, v0, co, use_pot, &v1, &z1)
            cell_min(gv, n, js[i], s, q, b, v0, co, use_pot, &v2, &z2)
            if v2 < v1 - TIE_TOL or (fabs(v2 - v1) <= TIE_TOL and z2 < z1):
                v1 = v2
                z1 = z2
            Fv[i] = v1
            Zv[i] = z1
    return F, Z


def basin_gap(h, jstar, double q, double b, long M):
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const long[::1] js = np.ascontiguousarray(jstar, dtype=np.int64)
    cdef long n = hv.shape[0]
    cdef long W = 2 * M + 1
    # hx[i + k] is the node value at offset d = k - M from node i
    cdef const double[::1] hx = np.ascontiguousarray(
        np.asarray(hv)[(np.arange(n + W - 1) - M) % n])
    d = np.arange(-M, M + 1) / n
    cdef const double[::1] f = np.ascontiguousarray((0.5 * q * d + b) * d)
    gap = np.empty(n)
    cdef double[::1] gv = gap
    cdef long i, k, l, r, c0
    cdef double best, other, v
    with nogil:
        for i in range(n):
            c0 = js[i] - i + M
            best = hx[i + c0] + f[c0]
            r = c0
            while r < W - 1 and hx[i + r + 1] + f[r + 1] >= hx[i + r] + f[r]:
                r += 1
            l = c0
            while l > 0 and hx[i + l - 1] + f[l - 1] >= hx[i + l] + f[l]:
                l -= 1
            other = INFINITY
            for k in range(l):
                v = hx[i + k] + f[k]
                if v < other:
                    other = v
            for k in range(r + 1, W):
                v = hx[i + k] + f[k]
                if v < other:
                    other = v
            gv[i] = other - best
    return gap


def lo_kernel(g, double q, double b, long M, double v0, coeffs, bint use_pot, bint with_gap):
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef const double[::1] co = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef long n = gv.shape[0]
    cdef long i
    h_arr = np.empty(n)
    cdef double[::1] h = h_arr
    for i in range(n):
        h[i] = gv[i] + (pot(<double>i / n, v0, co, 0) if use_pot else 0.0)
    jstar = discrete_argmin(h_arr, q, b, M)
    cdef const long[::1] js = jstar
    for i in range(n):
        if js[i] - i >= M or i - js[i] >= M:
            raise WindowExhaustedError(
                f"minimizer for node {i} reached the window edge "
                f"(offset {js[i] - i} of {M} cells)")
    F, Z = refine(g, jstar, q, b, v0, coeffs, use_pot)
    gap = basin_gap(h_arr, jstar, q, b, M) if with_gap else None
    return F, Z, jstar, gap
