import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from twistkam import GeneratingFunction, GridFunction, weak_kam_backward
from twistkam.weak_kam import conjugate_plus

settings.register_profile(
    "default", deadline=None, max_examples=40, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_lipschitz(rng, n, modes=6, amp=0.08):
    """Random trigonometric sum; Lipschitz with constant below ``2 pi amp sum(1/k)``."""
    k = np.arange(1, modes + 1)
    a = rng.normal(size=modes) * amp / k**2
    ph = rng.uniform(0, 2 * np.pi, modes)
    x = np.arange(n) / n
    return GridFunction((a[:, None] * np.cos(2 * np.pi * k[:, None] * x + ph[:, None])).sum(0))


@functools.lru_cache(maxsize=None)
def fk_solution(K=1.0, c=0.0, n=4096, tol=1e-9):
    gf = GeneratingFunction.frenkel_kontorova(K)
    u, rep = weak_kam_backward(gf, c, tol=tol, n=n)
    return gf, u, rep


@functools.lru_cache(maxsize=None)
def fk_pair(K=1.0, c=0.0, n=4096, tol=1e-9):
    gf, u, rep = fk_solution(K, c, n, tol)
    up, rep_p = conjugate_plus(u, gf, c, rep.s_bar, tol=tol)
    return gf, u, up, rep, rep_p


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def fk():
    return GeneratingFunction.frenkel_kontorova(1.0)


@pytest.fixture(scope="session")
def integrable():
    return GeneratingFunction.integrable()


def dense_scan(u, gf, c, nodes, forward=False, refine=25):
    """Brute-force ``T-[u]`` (or ``T+[u]``) at the given node indices.

    Scans the whole window with step ``1 / (refine n)`` aligned with the grid,
    so kinks of the interpolant sit exactly on scan points.
    """
    from twistkam import eval_s

    n = u.n
    M = int(np.ceil(gf.window_for(c) * n)) * refine
    offs = np.arange(-M, M + 1) / (refine * n)
    out = np.empty(len(nodes))
    for k, i in enumerate(nodes):
        s = i / n
        z = s + offs
        if forward:
            out[k] = np.max(u(z) - eval_s(gf, c, s, z))
        else:
            out[k] = np.min(u(z) + eval_s(gf, c, z, s))
    return out
