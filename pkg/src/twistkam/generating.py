"""Generating functions of exact twist maps of the annulus.

Every built-in family has the separable form

    S(x, y) = (q / 2) (x - y)**2 + V(x),    V(x) = v0 + sum_k a_k cos(2 pi k x)

so ``-d12 S == q`` everywhere and the cohomology shift ``S_c = S + c (x - y)``
only adds a linear term in the displacement.  The compute kernels rely on this
form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class InvalidModelError(ValueError):
    """Raised for non-finite or otherwise unusable model parameters."""


class TwistViolationError(RuntimeError):
    """Raised when a monotone root bracket cannot be found (twist lost)."""


class Family(str, enum.Enum):
    INTEGRABLE = "integrable"
    FRENKEL_KONTOROVA = "frenkel_kontorova"
    CUSTOM = "custom"


@dataclass(frozen=True)
class GeneratingFunction:
    """Immutable generating function ``S(x, y)`` of a twist-map lift.

    ``coupling`` is the coefficient ``q`` of the quadratic interaction; the
    potential is stored as a constant ``v0`` plus cosine coefficients
    ``cos_coeffs[k-1]`` multiplying ``cos(2 pi k x)``.
    """

    family: Family
    parameters: tuple[float, ...] = ()
    coupling: float = 1.0
    v0: float = 0.0
    cos_coeffs: tuple[float, ...] = ()
    twist_eps: float = 1.0
    window: float | None = None
    _coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = (self.coupling, self.v0, self.twist_eps, *self.cos_coeffs, *self.parameters)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidModelError(f"non-finite parameter in {self.family.value} model")
        if self.window is not None and not (math.isfinite(self.window) and self.window > 0):
            raise InvalidModelError(f"window must be positive, got {self.window}")
        if self.twist_eps <= 0:
            raise InvalidModelError(f"twist_eps must be positive, got {self.twist_eps}")
        object.__setattr__(self, "_coeffs", np.asarray(self.cos_coeffs, dtype=float))

    # -- constructors -------------------------------------------------------

    @classmethod
    def integrable(cls, twist_eps=1.0, window=None):
        return cls(Family.INTEGRABLE, (), 1.0, 0.0, (), twist_eps, window)

    @classmethod
    def frenkel_kontorova(cls, K, twist_eps=1.0, window=None):
        """``(x-y)^2/2 + K/(2 pi)^2 (1 - cos 2 pi x)``."""
        K = float(K)
        a = K / TWO_PI**2
        return cls(Family.FRENKEL_KONTOROVA, (K,), 1.0, a, (-a,), twist_eps, window)

    @classmethod
    def custom(cls, fourier_cos, coupling=1.0, twist_eps=None, window=None):
        coeffs = tuple(float(a) for a in fourier_cos)
        if twist_eps is None:
            twist_eps = abs(coupling) if coupling != 0 else 1.0
        return cls(Family.CUSTOM, coeffs, float(coupling), 0.0, coeffs, twist_eps, window)

    # -- potential ------------------------------------------------------------

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    def potential(self, x, order=0):
        """``V`` (order 0) or its first/second derivative at ``x``."""
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.v0 if order == 0 else 0.0)
        for k, a in enumerate(self._coeffs, start=1):
            w = TWO_PI * k
            if order == 0:
                out = out + a * np.cos(w * x)
            elif order == 1:
                out = out - a * w * np.sin(w * x)
            else:
                out = out - a * w * w * np.cos(w * x)
        return out if out.ndim else float(out)

    def window_for(self, c: float) -> float:
        """Coercivity window: user value, else ``2 + |c| / eps``."""
        if self.window is not None:
            return float(self.window)
        return 2.0 + abs(c) / self.twist_eps

    def curvature_bound(self) -> float:
        """Upper bound on ``|d11 S|`` used for error estimates."""
        return abs(self.coupling) + sum(abs(a) * (TWO_PI * k) ** 2 for k, a in enumerate(self._coeffs, 1))


def _check_c(c):
    c = float(c)
    if not math.isfinite(c):
        raise InvalidModelError(f"cohomology class must be finite, got {c}")
    return c


def eval_s(gf: GeneratingFunction, c, x, y):
    """``S_c(x, y) = S(x, y) + c (x - y)``."""
    c = _check_c(c)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    out = 0.5 * gf.coupling * d * d + gf.potential(x) + c * d
    return out if np.ndim(out) else float(out)


def d1(gf: GeneratingFunction, c, x, y):
    """``d1 S_c(x, y) = d1 S(x, y) + c``."""
    x = np.asarray(x, dtype=float)
    out = gf.coupling * (x - np.asarray(y, dtype=float)) + gf.potential(x, 1) + float(c)
    return out if np.ndim(out) else float(out)


def d2(gf: GeneratingFunction, c, x, y):
    """``d2 S_c(x, y) = d2 S(x, y) - c``."""
    out = gf.coupling * (np.asarray(y, dtype=float) - np.asarray(x, dtype=float)) - float(c)
    return out if np.ndim(out) else float(out)


def d12(gf: GeneratingFunction, x, y):
    return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, -gf.coupling)


# -- the discrete standard map ----------------------------------------------

_MAX_EXPANSIONS = 60


def _solve_increasing(fun, target, guess, slope_lb):
    """Root of the strictly increasing scalar map ``fun(t) = target``.

    Bracket expansion from ``guess`` with doubling steps, then bisection to
    1e-12 and a final secant step inside the last bracket.
    """
    step = max(1.0, abs(fun(guess) - target) / max(slope_lb, 1e-300))
    lo = hi = guess
    flo = fhi = fun(guess) - target
    n = 0
    while flo > 0:
        hi, fhi = lo, flo
        lo = lo - step
        flo = fun(lo) - target
        step *= 2.0
        n += 1
        if n > _MAX_EXPANSIONS:
            raise TwistViolationError("no root bracket below the predictor")
    while fhi < 0:
        lo, flo = hi, fhi
        hi = hi + step
        fhi = fun(hi) - target
        step *= 2.0
        n += 1
        if n > _MAX_EXPANSIONS:
            raise TwistViolationError("no root bracket above the predictor")
    for _ in range(200):
        if hi - lo <= 1e-12 * max(1.0, abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        fm = fun(mid) - target
        if fm == 0.0:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    flo, fhi = fun(lo) - target, fun(hi) - target
    if fhi != flo:
        t = lo - flo * (hi - lo) / (fhi - flo)
        if lo <= t <= hi:
            return t
    return 0.5 * (lo + hi)


def _twist_ok(gf):
    if gf.coupling <= 0:
        raise TwistViolationError(f"coupling {gf.coupling} gives no positive twist")


def standard_map(gf: GeneratingFunction, c, x, p):
    """``F_c(x, p) = (y, p')`` with ``p = -d1 S_c(x, y)`` and ``p' = d2 S_c(x, y)``."""
    c = _check_c(c)
    _twist_ok(gf)
    x, p = float(x), float(p)
    # y -> -d1 S_c(x, y) is increasing with slope q
    y = _solve_increasing(lambda t: -d1(gf, c, x, t), p, x + p, gf.coupling)
    return y, d2(gf, c, x, y)


def standard_map_inv(gf: GeneratingFunction, c, y, p2):
    """``F_c^{-1}(y, p') = (x, p)``."""
    c = _check_c(c)
    _twist_ok(gf)
    y, p2 = float(y), float(p2)
    # x -> d2 S_c(x, y) is decreasing, so solve -d2 = -p2 increasing in x
    x = _solve_increasing(lambda t: -d2(gf, c, t, y), -p2, y - p2, gf.coupling)
    return x, -d1(gf, c, x, y)


def standard_map_array(gf: GeneratingFunction, c, x, p):
    """Vectorized ``F_c``; exact for the separable families used here."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    _twist_ok(gf)
    # p = -(q (x - y) + V'(x) + c)  =>  y = x + (p + V'(x) + c) / q
    y = x + (p + gf.potential(x, 1) + c) / gf.coupling
    return y, d2(gf, c, x, y)


# -- hypothesis sampling ------------------------------------------------------


@dataclass
class HypothesisReport:
    periodicity_ok: bool
    periodicity_err: float
    coercivity_ok: bool
    coercivity_margin: float
    twist_ok: bool
    twist_margin: float
    noncrossing_ok: bool
    noncrossing_margin: float
    n_samples: int

    @property
    def all_pass(self) -> bool:
        return self.periodicity_ok and self.coercivity_ok and self.twist_ok and self.noncrossing_ok

    def lines(self):
        def tag(ok):
            return "PASS" if ok else "FAIL"

        return [
            f"H1 periodicity  {tag(self.periodicity_ok)}  max_err={self.periodicity_err:.3e}",
            f"H1 coercivity   {tag(self.coercivity_ok)}  margin={self.coercivity_margin:.6g}",
            f"H2 twist        {tag(self.twist_ok)}  min(-d12 S)={self.twist_margin:.6g}",
            f"H3 non-crossing {tag(self.noncrossing_ok)}  min margin={self.noncrossing_margin:.6g}",
        ]


def noncrossing_margin(gf, c, x1, x2, y1, y2):
    """``S(x1,y1)+S(x2,y2) - S(x1,y2) - S(x2,y1)``; positive when non-crossing holds."""
    return (eval_s(gf, c, x1, y1) + eval_s(gf, c, x2, y2)
            - eval_s(gf, c, x1, y2) - eval_s(gf, c, x2, y1))


def verify_hypotheses(gf: GeneratingFunction, c=0.0, n_samples=1024, seed=0) -> HypothesisReport:
    """Sampled checks of periodicity/coercivity, twist and non-crossing.

    Failures are reported, never raised.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    c = _check_c(c)
    rng = np.random.default_rng(seed)
    W = gf.window_for(c)
    x = rng.uniform(-1.0, 2.0, n_samples)
    y = x + rng.uniform(-W, W, n_samples)

    s = eval_s(gf, c, x, y)
    errs = []
    for m in (-3, -1, 1, 2, 5):
        errs.append(np.max(np.abs(eval_s(gf, c, x + m, y + m) - s) / (1.0 + np.abs(s))))
    per_err = float(max(errs))
    per_ok = per_err <= 1e-12

    # coercivity: S_c on the window boundary exceeds the diagonal values
    xs = np.linspace(0.0, 1.0, max(n_samples, 8), endpoint=False)
    diag_max = float(np.max(eval_s(gf, c, xs, xs)))
    edge = np.minimum(eval_s(gf, c, xs, xs + W), eval_s(gf, c, xs, xs - W))
    coer_margin = float(np.min(edge) - diag_max)
    coer_ok = coer_margin > 0

    # twist via finite differences of d1 S in y
    h = 1e-5
    fd = (d1(gf, c, x, y + h) - d1(gf, c, x, y - h)) / (2 * h)
    twist = float(np.min(-fd))
    twist_ok = twist >= gf.twist_eps * (1 - 1e-6)

    # non-crossing on quadruples with (x1-x2)(y1-y2) < 0
    x1 = rng.uniform(0, 1, n_samples)
    x2 = rng.uniform(0, 1, n_samples)
    y1 = x1 + rng.uniform(-1, 1, n_samples)
    y2 = x2 + rng.uniform(-1, 1, n_samples)
    sel = (x1 - x2) * (y1 - y2) < 0
    if np.any(sel):
        m = noncrossing_margin(gf, c, x1[sel], x2[sel], y1[sel], y2[sel])
        nc_margin = float(np.min(m))
        nc_ok = bool(np.all(m > 0))
    else:
        nc_margin, nc_ok = float("inf"), True
    return HypothesisReport(per_ok, per_err, coer_ok, coer_margin, twist_ok, twist,
                            nc_ok, nc_margin, n_samples)
