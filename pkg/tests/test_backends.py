import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistkam import _backend, _kernels
from twistkam.generating import GeneratingFunction
from conftest import random_lipschitz

ck = _backend.compiled_kernels
needs_ext = pytest.mark.skipif(ck is None, reason="compiled kernel not built")


def _args(gf, n, c):
    return gf.coupling, c, int(np.ceil(gf.window_for(c) * n)), gf.v0, gf.coeffs


@needs_ext
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-0.5, 0.5), K=st.sampled_from([0.0, 0.5, 1.0]),
       n=st.sampled_from([64, 256, 1024]))
def test_kernels_agree(seed, c, K, n):
    gf = GeneratingFunction.frenkel_kontorova(K) if K else GeneratingFunction.integrable()
    g = random_lipschitz(np.random.default_rng(seed), n).values
    q, b, M, v0, co = _args(gf, n, c)
    use_pot = bool(K)
    Fp, zp, jp, gp = _kernels.lo_kernel(g, q, b, M, v0, co, use_pot, True)
    Fc, zc, jc, gc = ck.lo_kernel(g, q, b, M, v0, co, use_pot, True)
    np.testing.assert_array_equal(jp, jc)
    assert np.max(np.abs(Fp - Fc)) <= 1e-12
    assert np.max(np.abs(zp - zc)) <= 1e-9
    fin = np.isfinite(gp)
    np.testing.assert_array_equal(fin, np.isfinite(gc))
    assert np.max(np.abs(gp[fin] - gc[fin]), initial=0.0) <= 1e-12


@needs_ext
def test_leftmost_ties_agree():
    # odd nodes sit halfway between two equal wells; the left one wins
    g = np.zeros(128)
    g[::2] = -1.0
    i = np.arange(128)
    for kern in (_kernels, ck):
        j = kern.discrete_argmin(g, 1.0, 0.0, 16)
        np.testing.assert_array_equal(j, i - i % 2)
    np.testing.assert_array_equal(_kernels.discrete_argmin(g, 1.0, 0.0, 16),
                                  ck.discrete_argmin(g, 1.0, 0.0, 16))


@pytest.mark.parametrize("kern", [_kernels, pytest.param(ck, marks=needs_ext)],
                         ids=["python", "cython"])
def test_window_exhaustion(kern):
    g = -np.arange(256) / 256.0 * 50.0
    with pytest.raises(_kernels.WindowExhaustedError, match="window edge"):
        kern.lo_kernel(g, 1.0, 0.0, 4, 0.0, np.zeros(0), False, False)


def test_gap_none_without_flag():
    g = np.zeros(64)
    assert _kernels.lo_kernel(g, 1.0, 0.0, 8, 0.0, np.zeros(0), False, False)[3] is None


def test_active_backend_name():
    assert _backend.NAME == ("cython" if ck is not None and
                             os.environ.get("TWISTKAM_BACKEND", "").lower() != "python" else "python")


def test_forced_python_fallback():
    code = ("import twistkam, twistkam.lax_oleinik as lo; "
            "print(twistkam.BACKEND, lo.kernels.__name__)")
    env = dict(os.environ, TWISTKAM_BACKEND="python")
    r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert r.stdout.split() == ["python", "twistkam._kernels"]
