"""Singular dynamics of a weak K.A.M. solution.

The optimal forward map ``Sigma_+`` of ``u = T-[v]`` is a monotone degree-one
circle map lift; it carries singular points of ``u`` to singular points, and
its rotation number is ``alpha'(c)``.  On the pseudo-graph
``Graph(c + D+u)`` (completed by vertical segments over singular points)
the induced map ``Lambda`` collapses each vertical segment to a point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from twistkam.generating import GeneratingFunction, d1, d2, standard_map_array
from twistkam.grid import (GridFunction, semiconcavity_constant, superdifferential_array,
                           two_sided_curvature)
from twistkam.lax_oleinik import o_n_set, t_minus, t_plus


class TheoryViolationError(RuntimeError):
    """Computed ``Sigma_+`` is not monotone: input outside the valid class or under-resolved."""


class ResolutionError(RuntimeError):
    """A propagated singularity fell below the detection threshold."""

    def __init__(self, msg, k):
        super().__init__(msg)
        self.k = k


class OffGraphError(ValueError):
    """Point given to ``lambda_map`` is not on the pseudo-graph."""


MONO_TOL = 1e-6


def default_delta_sing(n):
    return 20.0 / n


# -- Sigma_+ as a circle map lift ----------------------------------------------


@dataclass(frozen=True)
class CircleMapLift:
    """Degree-one lift given by node samples; ``Phi(x + 1) = Phi(x) + 1``."""

    samples: np.ndarray
    lip_estimate: float
    gap: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.samples.size

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        disp = GridFunction(s - np.arange(s.size) / s.size)
        object.__setattr__(self, "_disp", disp)
        object.__setattr__(self, "_dlist", disp.values.tolist())

    @property
    def displacement(self) -> GridFunction:
        return self._disp

    def __call__(self, x):
        """Evaluate by linear interpolation of ``Phi(x) - x``, reducing ``x`` mod 1 first."""
        if isinstance(x, (float, int)):
            return self._scalar(float(x))
        x = np.asarray(x, dtype=float)
        k = np.floor(x)
        r = x - k
        out = r + self._disp(r) + k
        return out if out.ndim else float(out)

    def _scalar(self, x):
        # same arithmetic as the array path, without numpy overhead
        k = math.floor(x)
        r = x - k
        n = self.n
        t = r * n
        j = math.floor(t)
        frac = t - j
        j = int(j) % n
        d = self._dlist
        return r + (d[j] + frac * (d[(j + 1) % n] - d[j])) + k

    def monotonicity_violation(self) -> float:
        s = np.append(self.samples, self.samples[0] + 1.0)
        return float(max(0.0, -np.min(np.diff(s))))


def _make_lift(u, gf, c, with_gap=True):
    r = t_plus(u, gf, c, with_gap=with_gap)
    s = np.asarray(r.arg_map, dtype=float)
    n = s.size
    steps = np.diff(np.append(s, s[0] + 1.0))
    lip = float(np.max(steps) * n)
    return CircleMapLift(s, lip, r.gap)


def sigma_plus_lift(u: GridFunction, gf: GeneratingFunction, c=0.0, s_bar=None,
                    with_gap=True) -> CircleMapLift:
    """``Sigma_+[u]`` sampled at the nodes.

    If the samples are not monotone, ``u`` is replaced once by
    ``T-[u] - s_bar`` (``s_bar`` defaults to the mean increment); a second
    failure raises :class:`TheoryViolationError`.  ``with_gap`` keeps the
    near-tie diagnostic of the argmax (a full window scan).
    """
    lift = _make_lift(u, gf, c, with_gap)
    if lift.monotonicity_violation() <= MONO_TOL:
        return lift
    w = t_minus(u, gf, c, with_gap=False).image
    if s_bar is None:
        s_bar = float(np.mean(w.values - u.values))
    lift = _make_lift(w - s_bar, gf, c, with_gap)
    v = lift.monotonicity_violation()
    if v > MONO_TOL:
        raise TheoryViolationError(f"Sigma_+ decreases by {v:.3e} between adjacent nodes")
    return lift


def rotation_number(lift, x0=0.0, n_iter=1000):
    """``((Phi^N(x0) - x0) / N, 1 / N)``."""
    if int(n_iter) != n_iter or n_iter < 1:
        raise ValueError("n_iter must be a positive integer")
    x = float(x0)
    for _ in range(int(n_iter)):
        x = lift(x)
    return (x - float(x0)) / n_iter, 1.0 / n_iter


def orbit(lift, x0, n_steps):
    xs = np.empty(n_steps + 1)
    xs[0] = x = float(x0)
    for k in range(1, n_steps + 1):
        x = lift(x)
        xs[k] = x
    return xs


# -- singularities ----------------------------------------------------------------


def _circ_dist(a, b):
    d = np.abs(np.mod(a - b + 0.5, 1.0) - 0.5)
    return d


def _runs(mask):
    """Maximal circular runs of True as (start, length) pairs."""
    n = mask.size
    if mask.all():
        return [(0, n)]
    if not mask.any():
        return []
    shift = int(np.flatnonzero(~mask)[0])
    m = np.roll(mask, -shift)
    out = []
    i = 0
    while i < n:
        if m[i]:
            j = i
            while j < n and m[j]:
                j += 1
            out.append(((i + shift) % n, j - i))
            i = j
        else:
            i += 1
    return out


@dataclass
class SingularityReport:
    points: list
    by_gap: list
    by_plateau: list
    disagreements: list = field(default_factory=list)
    delta_sing: float = 0.0

    @property
    def agree(self) -> bool:
        return not self.disagreements


def gap_singularities(u: GridFunction, delta_sing, stencil=3):
    """Detector A: clusters of nodes with ``D-u - D+u > delta_sing``; one point per
    cluster at the largest gap."""
    lo, hi = superdifferential_array(u, stencil=stencil)
    gap = hi - lo
    pts = []
    for start, length in _runs(gap > delta_sing):
        idx = (start + np.arange(length)) % u.n
        pts.append(float(idx[np.argmax(gap[idx])] / u.n))
    return sorted(pts)


def _plateaus(lift, min_length, tol):
    n = lift.n
    s = lift.samples
    flat = np.abs(np.diff(np.append(s, s[0] + 1.0))) <= tol
    # ``length`` equal steps span ``length + 1`` nodes
    return [(float(np.mod(s[start], 1.0)), length) for start, length in _runs(flat)
            if length / n > min_length]


def _groups(values, slack):
    """Split sorted circle points into chains whose consecutive spacing is <= slack."""
    if not values:
        return []
    order = sorted(values, key=lambda t: t[0])
    groups = [[order[0]]]
    for v in order[1:]:
        if v[0] - groups[-1][-1][0] <= slack:
            groups[-1].append(v)
        else:
            groups.append([v])
    if len(groups) > 1 and order[0][0] + 1.0 - order[-1][0] <= slack:
        groups[0] = groups.pop() + groups[0]
    return groups


def plateau_singularities(lift: CircleMapLift, min_length=None, tol=1e-12):
    """Detector B: values ``y`` (mod 1) that ``Sigma_+`` takes on an interval of
    length above ``min_length`` (default ``2 / n``).

    Plateau values closer than ``2 / n`` are one singularity smeared over a
    few cells; each such chain is reported once, at its longest plateau.
    """
    n = lift.n
    if min_length is None:
        min_length = 2.0 / n
    groups = _groups(_plateaus(lift, min_length, tol), 2.0 / n + 1e-12)
    return sorted(max(g, key=lambda t: t[1])[0] for g in groups), groups


def detect_singularities(u: GridFunction, lift: CircleMapLift, delta_sing=None,
                         stencil=3) -> SingularityReport:
    """Both detectors and their reconciliation within ``2 / n``.

    Reported points are the gap-detector locations, plus plateau chains
    with no gap counterpart (at their longest plateau).
    """
    n = u.n
    if delta_sing is None:
        delta_sing = default_delta_sing(n)
    if not delta_sing > 0:
        raise ValueError("delta_sing must be positive")
    a = gap_singularities(u, delta_sing, stencil)
    b, groups = plateau_singularities(lift)
    slack = 2.0 / n + 1e-12
    dis = []
    pts = list(a)
    for x in a:
        if not any(np.min(_circ_dist(np.array([v for v, _ in g]), x)) <= slack for g in groups):
            dis.append(("gap-only", x))
    for g in groups:
        m = np.array([v for v, _ in g])
        if not a or np.min(_circ_dist(np.array(a)[:, None], m[None, :])) > slack:
            y = max(g, key=lambda t: t[1])[0]
            dis.append(("plateau-only", y))
            pts.append(y)
    return SingularityReport(sorted(pts), a, sorted(b), dis, delta_sing)


def superdiff_gap(u: GridFunction, x, stencil=3):
    lo, hi = superdifferential_array(u, np.atleast_1d(np.asarray(x, dtype=float)), stencil)
    g = hi - lo
    return g if np.ndim(x) else float(g[0])


@dataclass
class SingularOrbit:
    points: np.ndarray
    gaps: np.ndarray
    rho_estimate: float
    rho_error: float
    rational: tuple | None = None
    below_threshold: list = field(default_factory=list)


def _rational_scan(xs, tol=1e-4, max_period=None):
    """First ``(k, m)`` with ``x_m - x_k`` integral within ``tol``; returns ``(p, q)``."""
    N = xs.size - 1
    max_period = N if max_period is None else max_period
    for m in range(1, N + 1):
        for k in range(max(0, m - max_period), m):
            d = xs[m] - xs[k]
            if abs(d - round(d)) <= tol:
                return int(round(d)), m - k
    return None


def propagate_singularity(x0, u: GridFunction, gf, c, lift: CircleMapLift, n_steps=1000,
                          delta_sing=None, strict=True, stencil=3) -> SingularOrbit:
    """Forward orbit ``x_{k+1} = Sigma_+(x_k)`` with the superdifferential gap
    at each point.

    With ``strict`` a gap at or below ``delta_sing`` raises
    :class:`ResolutionError` naming the first failing ``k``; otherwise the
    failing indices are recorded in ``below_threshold``.
    """
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError("n_steps must be a positive integer")
    n_steps = int(n_steps)
    if delta_sing is None:
        delta_sing = default_delta_sing(u.n)
    xs = orbit(lift, x0, n_steps)
    gaps = superdiff_gap(u, xs, stencil)
    bad = [int(k) for k in np.flatnonzero(gaps <= delta_sing)]
    if strict and bad:
        k = bad[0]
        raise ResolutionError(
            f"gap {gaps[k]:.3e} <= delta_sing {delta_sing:.3e} at step {k} (x={xs[k]:.6f})", k)
    rho = (xs[-1] - xs[0]) / n_steps
    rat = _rational_scan(xs[: min(xs.size, 401)])
    return SingularOrbit(xs, gaps, float(rho), 1.0 / n_steps, rat, bad)


def singular_rotation(lift, points, n_iter=1000):
    """Rotation number along the orbit of the first singular point (nan if none)."""
    if not len(points):
        return math.nan
    return rotation_number(lift, points[0], n_iter)[0]


# -- regularization --------------------------------------------------------------


@dataclass
class RegularizationReport:
    n: int
    input_two_sided: float
    t_minus_one_sided: float
    t_minus_two_sided: float
    w_two_sided: float


def regularization_check(u0: GridFunction, gf, c=0.0) -> RegularizationReport:
    """Second-difference bounds of ``u0``, ``T-[u0]`` and ``T+ T- T-[u0]``."""
    v = t_minus(u0, gf, c, with_gap=False).image
    w = t_plus(t_minus(v, gf, c, with_gap=False).image, gf, c, with_gap=False).image
    return RegularizationReport(u0.n, two_sided_curvature(u0), semiconcavity_constant(v),
                                two_sided_curvature(v), two_sided_curvature(w))


@dataclass
class RefinementStudy:
    reports: list

    @property
    def w_ratio(self) -> float:
        b = [r.w_two_sided for r in self.reports]
        return max(b) / min(b) if min(b) > 0 else (1.0 if max(b) == 0 else math.inf)

    @property
    def input_growth(self) -> float:
        b = [r.input_two_sided for r in self.reports]
        return b[-1] / b[0] if b[0] > 0 else (1.0 if b[-1] == 0 else math.inf)

    def passed(self, w_factor=2.0, growth=4.0) -> bool:
        return self.w_ratio <= w_factor and self.input_growth >= growth


def regularization_study(u0_fn, gf, c=0.0, grids=(1024, 2048, 4096)) -> RefinementStudy:
    """Run :func:`regularization_check` on ``u0_fn`` sampled at each grid size."""
    return RefinementStudy([regularization_check(GridFunction.from_callable(u0_fn, n), gf, c)
                            for n in grids])


def tent(x):
    """``min(x mod 1, 1 - x mod 1)``: concave kink at 1/2, convex kink at 0."""
    r = np.mod(x, 1.0)
    return np.minimum(r, 1.0 - r)


# -- pseudo-graph and Lambda ----------------------------------------------------------

GRAPH_ARC = "arc"
VERTICAL = "vertical"


@dataclass(frozen=True)
class PseudoGraph:
    """Vertices ``(x, p)`` in x-order; ``kinds[k]`` labels the edge from vertex
    ``k`` to ``k + 1``."""

    x: np.ndarray
    p: np.ndarray
    kinds: tuple
    singular: tuple

    def vertical_segments(self):
        return [(self.x[k], self.p[k], self.p[k + 1])
                for k, kind in enumerate(self.kinds) if kind == VERTICAL]

    def vertex_kinds(self):
        """Per-vertex label for CSV output: ``vertical`` on segment ends."""
        out = [GRAPH_ARC] * self.x.size
        for k, kind in enumerate(self.kinds):
            if kind == VERTICAL:
                out[k] = out[k + 1] = VERTICAL
        return out


def pseudo_graph(u: GridFunction, gf, c=0.0, delta_sing=None, lift=None,
                 stencil=3) -> PseudoGraph:
    """Graph of ``c + du`` over differentiable nodes plus a vertical segment
    ``{x*} x [c + D+u(x*), c + D-u(x*)]`` at each singular point.

    Arcs run through nodes whose superdifferential gap is at most
    ``delta_sing``.  Going left to right the segment is traversed from
    ``c + D-u`` down to ``c + D+u``.
    """
    n = u.n
    if delta_sing is None:
        delta_sing = default_delta_sing(n)
    if lift is None:
        lift = sigma_plus_lift(u, gf, c)
    sing = detect_singularities(u, lift, delta_sing, stencil).points
    lo, hi = superdifferential_array(u, stencil=stencil)
    smooth = (hi - lo) <= delta_sing
    xs = list(u.nodes[smooth])
    ps = list(c + 0.5 * (lo + hi)[smooth])
    kinds_of = [0] * len(xs)
    for xstar in sing:
        l, h = superdifferential_array(u, np.array([xstar]), stencil)
        xs += [xstar, xstar]
        ps += [c + float(h[0]), c + float(l[0])]
        kinds_of += [1, 2]
    order = sorted(range(len(xs)), key=lambda k: (xs[k], kinds_of[k]))
    X = np.array([xs[k] for k in order])
    P = np.array([ps[k] for k in order])
    tags = [kinds_of[k] for k in order]
    kinds = tuple(VERTICAL if (tags[k] == 1 and tags[k + 1] == 2) else GRAPH_ARC
                  for k in range(len(order) - 1))
    return PseudoGraph(X, P, kinds, tuple(sing))


def pseudo_graph_distance(u: GridFunction, c, x, p, stencil=3):
    """Distance in ``p`` from ``(x, p)`` to ``{x} x [c + D+u(x), c + D-u(x)]``."""
    lo, hi = superdifferential_array(u, np.atleast_1d(np.asarray(x, dtype=float)), stencil)
    a = np.minimum(lo, hi) + c
    b = np.maximum(lo, hi) + c
    p = np.atleast_1d(np.asarray(p, dtype=float))
    d = np.maximum(0.0, np.maximum(a - p, p - b))
    return d if np.ndim(x) else float(d[0])


def lambda_map(point, u: GridFunction, gf, c, lift: CircleMapLift, tol=None, check=True):
    """``Lambda(x, p) = (Sigma_+(x), d2 S(x, Sigma_+(x)))``; independent of ``p``.

    ``x`` is reduced mod 1 before evaluation so that equivariance is exact.
    ``p`` is only used for the on-graph check (``tol`` default ``10 / n``).
    """
    x, p = float(point[0]), float(point[1])
    if check:
        if tol is None:
            tol = 10.0 / u.n
        dist = pseudo_graph_distance(u, c, x, p)
        if dist > tol:
            raise OffGraphError(f"({x}, {p}) is {dist:.3e} away from the pseudo-graph")
    k = math.floor(x)
    r = x - k
    y = lift(r)
    return y + k, float(d2(gf, 0.0, r, y))


def lambda_map_array(x, u, gf, c, lift):
    """Vectorized ``Lambda`` without the on-graph check."""
    x = np.asarray(x, dtype=float)
    k = np.floor(x)
    r = x - k
    y = lift(r)
    return y + k, d2(gf, 0.0, r, y)


# -- diagram ------------------------------------------------------------------------------


@dataclass
class DiagramReport:
    diagram_residual: float
    minus_membership: float
    plus_membership: float
    residuals: np.ndarray


def diagram_check(u: GridFunction, gf, c, lift: CircleMapLift, stencil=3,
                  delta_sing=None) -> DiagramReport:
    """Compare ``Gamma+(x, Sigma_+(x))`` with ``F(Gamma-(x, Sigma_+(x)))`` at every node.

    Also reports how far ``Gamma-`` lands from ``Graph(c + d T+[u])`` (at nodes
    where ``T+[u]`` is differentiable) and ``Gamma+`` from the pseudo-graph of ``u``.
    """
    n = u.n
    if delta_sing is None:
        delta_sing = default_delta_sing(n)
    x = u.nodes
    y = lift.samples
    a_x, a_p = y, d2(gf, 0.0, x, y)
    p_minus = -d1(gf, 0.0, x, y)
    b_x, b_p = standard_map_array(gf, 0.0, x, p_minus)
    res = np.hypot(a_x - b_x, a_p - b_p)

    tp = t_plus(u, gf, c, with_gap=False).image
    lo, hi = superdifferential_array(tp, stencil=stencil)
    ok = np.abs(hi - lo) <= delta_sing
    mm = np.abs(c + 0.5 * (lo + hi) - p_minus)
    minus_mem = float(np.max(mm[ok])) if ok.any() else 0.0
    plus_mem = float(np.max(pseudo_graph_distance(u, c, y, a_p, stencil)))
    return DiagramReport(float(np.max(res)), minus_mem, plus_mem, res)


# -- alpha-limit ---------------------------------------------------------------------------


@dataclass
class AlphaLimitSet:
    indices: np.ndarray
    x: np.ndarray
    p: np.ndarray
    inv_residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.inv_residual)) if self.inv_residual.size else 0.0


def alpha_limit_set(u: GridFunction, gf, c=0.0, n_steps=64, delta=None, method="chain",
                    stencil=3) -> AlphaLimitSet:
    """Points ``(x_i, du(x_i))`` over the truncated coincidence set ``O^n[u]``.

    ``method`` is passed to :func:`twistkam.lax_oleinik.o_n_set`.  Each point's
    invariance residual is the distance from ``F_c`` of the point to the
    nearest point of the set (x taken mod 1).
    """
    idx = o_n_set(u, gf, c, n_steps, delta, method=method)
    lo, hi = superdifferential_array(u, stencil=stencil)
    x = u.nodes[idx]
    p = 0.5 * (lo + hi)[idx]
    if idx.size == 0:
        return AlphaLimitSet(idx, x, p, np.empty(0))
    fx, fp = standard_map_array(gf, c, x, p)
    resid = np.empty(idx.size)
    step = max(1, (1 << 20) // idx.size)
    for a in range(0, idx.size, step):
        dx = _circ_dist(fx[a:a + step, None], x[None, :])
        dp = fp[a:a + step, None] - p[None, :]
        resid[a:a + step] = np.min(np.hypot(dx, dp), axis=1)
    return AlphaLimitSet(idx, x, p, resid)
