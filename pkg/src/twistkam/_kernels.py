"""Pure numpy reference kernels for the Lax-Oleinik inf-convolution.

Every operator reduces to the banded problem, for nodes ``s = i / n``,

    F_i = min_z  H(z) + q/2 (z - s)^2 + b (z - s),    |z - s| <= M / n

where ``H`` is the periodic linear interpolant of ``g`` plus (optionally) the
smooth potential ``V``.  Because ``q > 0`` the node cost matrix is Monge, so
leftmost row argmins are non-decreasing in ``i`` and a divide-and-conquer
search over rows is exact.  The continuous minimum is then refined inside the
two cells adjacent to the discrete argmin.

The compiled module ``_ckernels`` implements the same functions with the same
signatures.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi
TIE_TOL = 1e-12
_GAP_CHUNK = 1 << 22


class WindowExhaustedError(RuntimeError):
    """A minimizer reached the edge of the search window."""


def potential(z, v0, coeffs, order=0):
    out = np.full(np.shape(z), v0 if order == 0 else 0.0)
    for k, a in enumerate(coeffs, start=1):
        w = TWO_PI * k
        if order == 0:
            out += a * np.cos(w * z)
        elif order == 1:
            out -= a * w * np.sin(w * z)
        else:
            out -= a * w * w * np.cos(w * z)
    return out


def _row_costs(h, i, j, n, q, b):
    d = (j - i) / n
    return h[j % n] + (0.5 * q * d + b) * d


def discrete_argmin(h, q, b, M):
    """Leftmost argmin ``j`` (absolute, unwrapped) of the node cost per row."""
    n = h.size
    jstar = np.empty(n, dtype=np.int64)
    rlo = np.array([0], dtype=np.int64)
    rhi = np.array([n - 1], dtype=np.int64)
    jlo = np.array([-M], dtype=np.int64)
    jhi = np.array([n - 1 + M], dtype=np.int64)
    while rlo.size:
        mid = (rlo + rhi) // 2
        a = np.maximum(jlo, mid - M)
        e = np.minimum(jhi, mid + M)
        cnt = e - a + 1
        starts = np.concatenate(([0], np.cumsum(cnt)[:-1]))
        seg = np.repeat(np.arange(mid.size), cnt)
        j = a[seg] + (np.arange(seg.size) - starts[seg])
        cost = _row_costs(h, mid[seg], j, n, q, b)
        best = np.minimum.reduceat(cost, starts)
        hit = np.flatnonzero(cost == best[seg])
        _, first = np.unique(seg[hit], return_index=True)
        jm = j[hit[first]]
        jstar[mid] = jm
        left = mid > rlo
        right = mid < rhi
        rlo, rhi, jlo, jhi = (
            np.concatenate((rlo[left], mid[right] + 1)),
            np.concatenate((mid[left] - 1, rhi[right])),
            np.concatenate((jlo[left], jm[right])),
            np.concatenate((jm[left], jhi[right])),
        )
    return jstar


def _cell_min(g, n, j, s, q, b, v0, coeffs, use_pot):
    """Minimum of the cost over the cell ``[j/n, (j+1)/n]``; returns (value, z)."""
    a = j / n
    gj = g[j % n]
    slope = (g[(j + 1) % n] - gj) * n

    def cost(z):
        d = z - s
        out = gj + slope * (z - a) + (0.5 * q * d + b) * d
        if use_pot:
            out = out + potential(z, v0, coeffs)
        return out

    def deriv(z):
        out = slope + q * (z - s) + b
        if use_pot:
            out = out + potential(z, v0, coeffs, 1)
        return out

    lo = a
    hi = (j + 1) / n
    dlo = deriv(lo)
    dhi = deriv(hi)
    inner = (dlo < 0) & (dhi > 0)
    if use_pot and coeffs.size:
        # safeguarded Newton on the bracket [lo, hi]
        zl, zh = lo.copy(), hi.copy()
        z = np.where(inner, 0.5 * (lo + hi), lo)
        for _ in range(60):
            dz = deriv(z)
            zl = np.where(dz < 0, z, zl)
            zh = np.where(dz > 0, z, zh)
            curv = q + potential(z, v0, coeffs, 2)
            with np.errstate(divide="ignore", invalid="ignore"):
                zn = z - dz / curv
            bad = ~((zn > zl) & (zn < zh)) | ~np.isfinite(zn)
            zn = np.where(bad, 0.5 * (zl + zh), zn)
            step = np.abs(zn - z)
            z = zn
            if np.all(~inner | (step <= 1e-15) | (zh - zl <= 1e-15)):
                break
        root = z
    else:
        root = s - (slope + b) / q
    root = np.where(inner, np.clip(root, lo, hi), lo)
    cands = [(cost(lo), lo), (cost(root), root), (cost(hi), hi)]
    return _pick(cands)


def _pick(cands):
    """Smallest value; ties within ``TIE_TOL`` go to the smaller ``z``."""
    val, z = cands[0]
    for v, w in cands[1:]:
        take = (v < val - TIE_TOL) | ((np.abs(v - val) <= TIE_TOL) & (w < z))
        val = np.where(take, v, val)
        z = np.where(take, w, z)
    return val, z


def refine(g, jstar, q, b, v0, coeffs, use_pot):
    """Continuous minimum in the two cells around ``jstar``; returns (F, z)."""
    n = g.size
    s = np.arange(n) / n
    coeffs = np.asarray(coeffs, dtype=float)
    left = _cell_min(g, n, jstar - 1, s, q, b, v0, coeffs, use_pot)
    right = _cell_min(g, n, jstar, s, q, b, v0, coeffs, use_pot)
    return _pick([left, right])


def basin_gap(h, jstar, q, b, M):
    """Best node cost outside the monotone basin of ``jstar`` minus the best cost.

    The basin is the maximal run around ``jstar`` on which the node cost
    increases moving away from ``jstar``; ``inf`` if it fills the window.
    """
    n = h.size
    W = 2 * M + 1
    hx = h[(np.arange(n + W - 1) - M) % n]
    d = np.arange(-M, M + 1) / n
    f = (0.5 * q * d + b) * d
    windows = np.lib.stride_tricks.sliding_window_view(hx, W)
    cols = np.arange(W)[None, :]
    gap = np.empty(n)
    rows = max(1, _GAP_CHUNK // W)
    for r0 in range(0, n, rows):
        i = np.arange(r0, min(n, r0 + rows))
        cost = windows[i] + f
        c0 = jstar[i] - i + M
        best = cost[np.arange(i.size), c0]
        inc = np.diff(cost, axis=1)
        # right edge: first k >= c0 with cost[k+1] < cost[k]
        dec_r = (inc < 0) & (cols[:, :-1] >= c0[:, None])
        r_edge = np.where(dec_r.any(1), dec_r.argmax(1), W - 1)
        # left edge: last k <= c0 with cost[k-1] < cost[k]
        dec_l = (inc > 0) & (cols[:, 1:] <= c0[:, None])
        rev = dec_l[:, ::-1]
        l_edge = np.where(rev.any(1), W - 1 - rev.argmax(1), 0)
        inside = (cols >= l_edge[:, None]) & (cols <= r_edge[:, None])
        gap[i] = np.where(inside, np.inf, cost).min(1) - best
    return gap


def lo_kernel(g, q, b, M, v0, coeffs, use_pot, with_gap):
    """Full operator kernel: returns ``(F, z, jstar, gap)``.

    ``gap`` is ``None`` unless ``with_gap``.
    """
    g = np.ascontiguousarray(g, dtype=float)
    n = g.size
    coeffs = np.asarray(coeffs, dtype=float)
    if use_pot:
        h = g + potential(np.arange(n) / n, v0, coeffs)
    else:
        h = g
    jstar = discrete_argmin(h, q, b, M)
    d = jstar - np.arange(n)
    if np.any(np.abs(d) >= M):
        i = int(np.flatnonzero(np.abs(d) >= M)[0])
        raise WindowExhaustedError(
            f"minimizer for node {i} reached the window edge (offset {int(d[i])} of {M} cells)")
    F, z = refine(g, jstar, q, b, v0, coeffs, use_pot)
    gap = basin_gap(h, jstar, q, b, M) if with_gap else None
    return F, z, jstar, gap
