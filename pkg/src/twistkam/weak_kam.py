"""Additive eigenproblem ``T-[u] = u + S_bar``: weak K.A.M. solutions, conjugate
pairs, the projected Aubry set and Mather's alpha function ``alpha(c) = -S_bar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from twistkam.generating import GeneratingFunction
from twistkam.grid import GridFunction
from twistkam.lax_oleinik import t_minus, t_plus

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 5000
DEFAULT_N = 4096


@dataclass
class SolveReport:
    s_bar: float
    iterations: int
    residual: float
    converged: bool
    history: list = field(default_factory=list)
    damping: float = 1.0

    def summary(self) -> str:
        flag = "converged" if self.converged else "FAILED to converge"
        return (f"{flag}: s_bar={self.s_bar:.12g} residual={self.residual:.3e} "
                f"iterations={self.iterations}")


@dataclass(frozen=True)
class ConjugatePair:
    u_minus: GridFunction
    u_plus: GridFunction

    @property
    def difference(self) -> np.ndarray:
        return self.u_minus.values - self.u_plus.values


STALL_WINDOW = 25


def _relative_iteration(op, u, tol, max_iter, damping, sign, stall=False):
    """Relative value iteration ``u <- (1-t) u + t (op(u) - m)``.

    ``m = mean(op(u) - u)``; stops once ``osc(op(u) - u) <= tol``.  Returns
    ``(u, m, residual, iterations, converged, history)`` where ``u`` is the
    last iterate whose residual was measured.  With ``stall`` it also stops
    when the residual has not halved over ``STALL_WINDOW`` steps.
    """
    history = []
    k = 0
    m = 0.0
    res = math.inf
    while True:
        w = op(u)
        diff = w.values - u.values
        m = float(np.mean(diff))
        res = float(np.max(diff) - np.min(diff))
        history.append((k, sign * m, res))
        if res <= tol or k >= max_iter:
            break
        if stall and k >= STALL_WINDOW and res > 0.5 * history[k - STALL_WINDOW][2]:
            break
        new = w.values - m
        if damping != 1.0:
            new = (1.0 - damping) * u.values + damping * new
        u = GridFunction(new)
        k += 1
    return u, m, res, k, res <= tol, history


def _solve_backward(gf, c, u0, tol, max_iter, damping):
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 0:
        raise ValueError("max_iter must be non-negative")

    def op(v):
        return t_minus(v, gf, c, with_gap=False).image

    out = _relative_iteration(op, u0, tol, max_iter, damping, 1.0, stall=damping == 1.0)
    if not out[4] and damping == 1.0 and out[3] < max_iter:
        # the undamped iteration can cycle; averaging with the identity kills the period
        u, _, _, k, _, hist = out
        rest = _relative_iteration(op, u, tol, max_iter - k, 0.5, 1.0)
        hist2 = [(k + 1 + j, s, r) for j, s, r in rest[5]]
        return rest[0], rest[1], rest[2], k + 1 + rest[3], rest[4], hist + hist2, 0.5
    return (*out, damping)


def effective_interaction(gf: GeneratingFunction, c=0.0, u0=None, tol=DEFAULT_TOL,
                          max_iter=DEFAULT_MAX_ITER, n=DEFAULT_N, damping=1.0) -> SolveReport:
    """Estimate ``S_bar_c`` by relative value iteration from ``u0`` (default 0)."""
    if u0 is None:
        u0 = GridFunction.constant(0.0, n)
    _, m, res, k, ok, hist, th = _solve_backward(gf, c, u0, tol, max_iter, damping)
    return SolveReport(m, k, res, ok, hist, th)


def weak_kam_backward(gf: GeneratingFunction, c=0.0, tol=DEFAULT_TOL,
                      max_iter=DEFAULT_MAX_ITER, n=DEFAULT_N, u0=None, damping=1.0):
    """Backward solution ``u_-`` gauged to ``u_-(0) = 0``, with its report."""
    if u0 is None:
        u0 = GridFunction.constant(0.0, n)
    u, m, res, k, ok, hist, th = _solve_backward(gf, c, u0, tol, max_iter, damping)
    return u.gauge(0), SolveReport(m, k, res, ok, hist, th)


def conjugate_plus(u_minus: GridFunction, gf: GeneratingFunction, c=0.0, s_bar=None,
                   tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, damping=1.0):
    """Forward conjugate ``u_+`` of a backward solution.

    Iterates ``T+`` from ``u_minus`` with the same relative scheme, then fixes
    the additive constant so that ``max(u_+ - u_-) = 0``, i.e. ``u_+ <= u_-``
    with contact.  ``s_bar`` is accepted for reference only: the forward grid
    eigenvalue is re-estimated since on a finite grid it may differ from the
    backward one at the interpolation-error level.  Returns ``(u_plus, report)``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")

    def op(v):
        return t_plus(v, gf, c, with_gap=False).image

    u, m, res, k, ok, hist = _relative_iteration(op, u_minus, tol, max_iter, damping, -1.0,
                                                 stall=damping == 1.0)
    th = damping
    if not ok and damping == 1.0 and k < max_iter:
        u, m, res, k2, ok, hist2 = _relative_iteration(op, u, tol, max_iter - k, 0.5, -1.0)
        hist += [(k + 1 + j, s, r) for j, s, r in hist2]
        k += 1 + k2
        th = 0.5
    shift = float(np.max(u.values - u_minus.values))
    return GridFunction(u.values - shift), SolveReport(-m, k, res, ok, hist, th)


def conjugate_pair(gf, c=0.0, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, n=DEFAULT_N):
    """``(ConjugatePair, backward report, forward report)``."""
    um, rep = weak_kam_backward(gf, c, tol, max_iter, n)
    up, rep_p = conjugate_plus(um, gf, c, rep.s_bar, tol, max_iter)
    return ConjugatePair(um, up), rep, rep_p


def projected_aubry(pair: ConjugatePair, delta=1e-4) -> np.ndarray:
    """Indices with ``u_- - u_+ <= delta``; an over-approximation of the
    projected Aubry set (single pair, not the intersection over all pairs)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return np.flatnonzero(pair.difference <= delta)


def is_sub_action(u: GridFunction, gf, c, s_bar, n_pairs=2000, seed=0, tol=1e-6):
    """Sampled check of ``u(y) - u(x) <= S_c(x, y) - S_bar``; returns the worst excess."""
    from twistkam.generating import eval_s

    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n_pairs)
    y = x + rng.uniform(-2, 2, n_pairs)
    excess = u(y) - u(x) - (eval_s(gf, c, x, y) - s_bar)
    return float(np.max(excess))


@dataclass
class SweepRow:
    c: float
    alpha: float
    s_bar: float
    alpha_prime_fd: float
    rho_sigma: float
    rho_error: float
    residual: float
    iterations: int
    converged: bool
    singularities: tuple = ()
    rho_singular: float = math.nan


SWEEP_HEADER = ["c", "alpha", "s_bar", "alpha_prime_fd", "rho_sigma", "residual", "iterations"]


def alpha_sweep(gf: GeneratingFunction, c_values, tol=DEFAULT_TOL, n=DEFAULT_N,
                max_iter=DEFAULT_MAX_ITER, n_iter_rotation=1000, fd_step=None,
                fd_tol=None, delta_sing=None, warm_start=True):
    """Per class ``c``: ``alpha = -S_bar``, a centered difference of ``alpha``
    and the rotation number of ``Sigma_+``.

    ``fd_step`` defaults to the spacing of ``c_values``; when it is smaller
    than the spacing, ``alpha`` is additionally solved at ``c +- fd_step``.
    With a single ``c`` the derivative is taken with that extra solve.
    ``fd_tol`` (default ``tol``) is the tolerance of those extra solves; the
    difference quotient amplifies eigenvalue errors by ``1 / fd_step``.
    Failed solves are recorded (``converged=False``) and the sweep continues.
    """
    from twistkam.singular import (detect_singularities, rotation_number,
                                   sigma_plus_lift, singular_rotation)

    cs = np.asarray(c_values, dtype=float)
    if cs.ndim != 1 or cs.size < 1:
        raise ValueError("c_values must be a non-empty sequence")
    if np.any(np.diff(cs) <= 0):
        raise ValueError("c_values must be strictly increasing")
    spacing = float(np.min(np.diff(cs))) if cs.size > 1 else None
    if fd_step is None:
        fd_step = spacing if spacing is not None else 1e-3
    fd_tol = tol if fd_tol is None else fd_tol
    use_neighbours = spacing is not None and abs(fd_step - spacing) <= 1e-12 * max(1.0, spacing)

    rows = []
    sols = []
    u_prev = None
    for c in cs:
        u0 = u_prev if (warm_start and u_prev is not None) else GridFunction.constant(0.0, n)
        try:
            u, rep = weak_kam_backward(gf, c, tol, max_iter, n, u0=u0)
        except Exception:  # solver-side failure is recorded, not raised
            rows.append(SweepRow(float(c), math.nan, math.nan, math.nan, math.nan, math.nan,
                                 math.nan, 0, False))
            sols.append(None)
            u_prev = None
            continue
        u_prev = u
        sols.append(u)
        try:
            lift = sigma_plus_lift(u, gf, c, rep.s_bar, with_gap=False)
            rho, err = rotation_number(lift, 0.0, n_iter_rotation)
            sing = detect_singularities(u, lift, delta_sing).points
            rho_s = singular_rotation(lift, sing, n_iter_rotation)
        except Exception:
            rho, err, sing, rho_s = math.nan, math.nan, (), math.nan
        resid = rep.residual if rep.converged else math.nan
        rows.append(SweepRow(float(c), -rep.s_bar, rep.s_bar, math.nan, rho, err, resid,
                             rep.iterations, rep.converged, tuple(sing), rho_s))

    if use_neighbours:
        alphas = np.array([r.alpha for r in rows])
        if cs.size >= 3:
            d = np.gradient(alphas, cs, edge_order=2)
        else:
            d = np.gradient(alphas, cs)
        for r, v in zip(rows, d):
            r.alpha_prime_fd = float(v)
    else:
        for r, u in zip(rows, sols):
            try:
                s_p = effective_interaction(gf, r.c + fd_step, u0=u, tol=fd_tol, n=n,
                                            max_iter=max_iter)
                s_m = effective_interaction(gf, r.c - fd_step, u0=u, tol=fd_tol, n=n,
                                            max_iter=max_iter)
                r.alpha_prime_fd = float((s_m.s_bar - s_p.s_bar) / (2 * fd_step))
            except Exception:
                r.alpha_prime_fd = math.nan
    return rows
