"""Backward and forward discrete Lax-Oleinik operators at cohomology class ``c``.

    T-[u](y) = inf_x  u(x) + S_c(x, y)
    T+[u](x) = sup_y  u(y) - S_c(x, y)

Both are evaluated exactly for the periodic linear interpolant of ``u`` (up to
a root solve inside one cell), see :mod:`twistkam._kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from twistkam._backend import kernels
from twistkam._kernels import WindowExhaustedError
from twistkam.generating import GeneratingFunction, InvalidModelError
from twistkam.grid import GridFunction

__all__ = [
    "OperatorResult",
    "WindowExhaustedError",
    "t_minus",
    "t_plus",
    "t_minus_n",
    "t_plus_n",
    "t_plus_t_minus_n",
    "o_n_set",
]


@dataclass(frozen=True)
class OperatorResult:
    """``image`` on the grid, absolute optimizer per node, and the gap diagnostic.

    ``arg_map[i]`` is the minimizing ``x`` for ``T-`` at ``y_i`` (or the
    maximizing ``y`` for ``T+`` at ``x_i``); it is a lift, so the optimizer at
    ``y_i + 1`` is ``arg_map[i] + 1``.  ``gap[i]`` is the best objective
    outside the optimizer's basin minus the optimum (``None`` when not
    requested); small values flag near-ties.
    """

    image: GridFunction
    arg_map: np.ndarray
    gap: np.ndarray | None


def _setup(u, gf, c):
    if not isinstance(u, GridFunction):
        u = GridFunction(u)
    c = float(c)
    if not math.isfinite(c):
        raise InvalidModelError(f"cohomology class must be finite, got {c}")
    if gf.coupling <= 0:
        raise InvalidModelError("operators need positive coupling (twist)")
    M = int(math.ceil(gf.window_for(c) * u.n))
    return u, c, M


def t_minus(u: GridFunction, gf: GeneratingFunction, c=0.0, with_gap=True) -> OperatorResult:
    u, c, M = _setup(u, gf, c)
    F, z, _, gap = kernels.lo_kernel(u.values, gf.coupling, c, M, gf.v0, gf.coeffs,
                                     True, with_gap)
    return OperatorResult(GridFunction(F), z, gap)


def t_plus(u: GridFunction, gf: GeneratingFunction, c=0.0, with_gap=True) -> OperatorResult:
    u, c, M = _setup(u, gf, c)
    F, z, _, gap = kernels.lo_kernel(-u.values, gf.coupling, -c, M, gf.v0, gf.coeffs,
                                     False, with_gap)
    image = -gf.potential(u.nodes) - F
    return OperatorResult(GridFunction(image), z, gap)


def _check_steps(n_steps):
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps}")
    return int(n_steps)


def t_minus_n(u, gf, c=0.0, n_steps=1) -> GridFunction:
    for _ in range(_check_steps(n_steps)):
        u = t_minus(u, gf, c, with_gap=False).image
    return u


def t_plus_n(u, gf, c=0.0, n_steps=1) -> GridFunction:
    for _ in range(_check_steps(n_steps)):
        u = t_plus(u, gf, c, with_gap=False).image
    return u


def t_plus_t_minus_n(u, gf, c=0.0, n_steps=1) -> GridFunction:
    """``T+^n o T-^n [u]``; never above ``u`` (up to round-off)."""
    return t_plus_n(t_minus_n(u, gf, c, n_steps), gf, c, n_steps)


def _backward_chain(u, gf, c, n_steps):
    """Nodes reached by ``n_steps`` backward optimal steps, i.e. ``Sigma_-^n[u]``."""
    lifts = []
    v = u
    for _ in range(n_steps):
        r = t_minus(v, gf, c, with_gap=False)
        lifts.append(r.arg_map)
        v = r.image
    n = u.n
    # walk from the last image back to u: y -> x = arg(y)
    pts = np.arange(n) / n
    for arg in reversed(lifts):
        pts = GridFunction(arg - u.nodes)(pts) + pts
    return np.unique(np.rint(np.mod(pts, 1.0) * n).astype(np.int64) % n)


def o_n_set(u, gf, c=0.0, n_steps=1, delta=None, method="threshold"):
    """Grid indices of the coincidence set ``{T+^n T-^n [u] = u}``.

    ``method="threshold"`` keeps nodes where the two differ by at most
    ``delta`` (default ``10 / n``).  ``method="chain"`` instead returns the
    nodes reached by ``n_steps`` backward optimal steps from every node,
    which is the same set in the continuum but does not depend on a
    threshold.
    """
    n_steps = _check_steps(n_steps)
    if not isinstance(u, GridFunction):
        u = GridFunction(u)
    if method == "chain":
        return _backward_chain(u, gf, c, n_steps)
    if method != "threshold":
        raise ValueError(f"unknown method {method!r}")
    if delta is None:
        delta = 10.0 / u.n
    if not delta > 0:
        raise ValueError("delta must be positive")
    w = t_plus_t_minus_n(u, gf, c, n_steps)
    return np.flatnonzero(np.abs(w.values - u.values) <= delta)
