"""1-periodic functions sampled on a uniform grid of ``[0, 1)``."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridFunction:
    """Samples ``values[i] = u(i / n)``, extended to the line by periodic linear
    interpolation."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("GridFunction needs a 1-d array of at least 2 samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("GridFunction values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @classmethod
    def from_callable(cls, f, n):
        return cls(np.asarray(f(np.arange(n) / n), dtype=float))

    @classmethod
    def constant(cls, a, n):
        return cls(np.full(n, float(a)))

    def __add__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.values + other.values)
        return GridFunction(self.values + float(other))

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.values - other.values)
        return GridFunction(self.values - float(other))

    def __call__(self, x):
        return eval_grid(self, x)

    def gauge(self, index=0) -> "GridFunction":
        """Shift so that the sample at ``index`` is zero."""
        return GridFunction(self.values - self.values[index])

    def resample(self, n):
        return GridFunction(eval_grid(self, np.arange(n) / n))


def eval_grid(u: GridFunction, x):
    """Periodic linear interpolation; exact at nodes and ``u(x + 1) == u(x)``."""
    x = np.asarray(x, dtype=float)
    n = u.n
    t = x * n
    # snap round-off (e.g. 0.29 * 100) so that evaluation at nodes is exact
    r = np.rint(t)
    t = np.where(np.abs(t - r) <= 8 * np.finfo(float).eps * np.maximum(1.0, np.abs(t)), r, t)
    j = np.floor(t)
    frac = t - j
    j = j.astype(np.int64) % n
    v = u.values
    out = v[j] + frac * (v[(j + 1) % n] - v[j])
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SuperdiffInterval:
    """``[lo, hi] = [D+ u(x), D- u(x)]``; a non-degenerate interval marks a kink."""

    lo: float
    hi: float

    @property
    def gap(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


def _one_sided_slopes(u: GridFunction, x, stencil):
    x = np.asarray(x, dtype=float)
    h = 1.0 / u.n
    k = np.arange(1, stencil + 1) * h
    u0 = np.asarray(eval_grid(u, x))[..., None]
    right = eval_grid(u, x[..., None] + k) - u0
    left = eval_grid(u, x[..., None] - k) - u0
    denom = np.sum(k * k)
    # least-squares lines anchored at (x, u(x))
    d_plus = right @ k / denom
    d_minus = -(left @ k) / denom
    return d_plus, d_minus


def superdifferential(u: GridFunction, x, stencil=3) -> SuperdiffInterval:
    """One-sided slope estimates ``[D+ u(x), D- u(x)]`` from ``stencil`` cells per side."""
    if stencil < 1:
        raise ValueError("stencil must be >= 1")
    d_plus, d_minus = _one_sided_slopes(u, float(x), stencil)
    return SuperdiffInterval(float(d_plus), float(d_minus))


def superdifferential_array(u: GridFunction, x=None, stencil=3):
    """Vectorized :func:`superdifferential`; returns ``(lo, hi)`` arrays (nodes by default)."""
    if stencil < 1:
        raise ValueError("stencil must be >= 1")
    if x is None:
        x = u.nodes
    return _one_sided_slopes(u, x, stencil)


def oscillation(u: GridFunction) -> float:
    return float(np.max(u.values) - np.min(u.values))


def second_differences(u: GridFunction, step=1):
    """``u(x + s h) + u(x - s h) - 2 u(x)`` over all nodes, ``s = step``."""
    v = u.values
    return np.roll(v, -step) + np.roll(v, step) - 2.0 * v


def semiconcavity_constant(u: GridFunction) -> float:
    """Smallest ``C >= 0`` with ``u(x+h) + u(x-h) - 2u(x) <= C h^2`` on the grid.

    ``h`` runs over grid multiples up to 1/4.
    """
    n = u.n
    if n < 3:
        raise ValueError("need n >= 3")
    best = 0.0
    for s in range(1, max(1, n // 4) + 1):
        h = s / n
        best = max(best, float(np.max(second_differences(u, s))) / (h * h))
    return max(best, 0.0)


def two_sided_curvature(u: GridFunction) -> float:
    """``max |u(x+h) + u(x-h) - 2u(x)| / h^2`` at the grid spacing."""
    return float(np.max(np.abs(second_differences(u)))) * u.n**2


# -- CSV ----------------------------------------------------------------------


def fmt(x) -> str:
    """17 significant digits (round-trip exact); negative zero prints as 0."""
    return format(float(x) + 0.0, ".17g")


def to_csv(u: GridFunction) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "u"])
    for x, v in zip(u.nodes, u.values):
        w.writerow([fmt(x), fmt(v)])
    return buf.getvalue()


def from_csv(text: str) -> GridFunction:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != ["x", "u"]:
        raise ValueError("expected header 'x,u'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    n = data.shape[0]
    if not np.allclose(data[:, 0], np.arange(n) / n, atol=1e-12):
        raise ValueError("x column must be the uniform grid i/n ascending from 0")
    return GridFunction(data[:, 1])


def write_csv(u: GridFunction, path):
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(u))


def read_csv(path) -> GridFunction:
    with open(os.fspath(path)) as fh:
        return from_csv(fh.read())
