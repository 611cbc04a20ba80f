import numpy as np
import pytest

from twistkam import (GeneratingFunction, GridFunction, alpha_sweep, conjugate_plus,
                      effective_interaction, projected_aubry, t_minus, weak_kam_backward)
from twistkam.grid import superdifferential_array
from twistkam.lax_oleinik import t_plus_t_minus_n
from twistkam.singular import detect_singularities, sigma_plus_lift
from twistkam.weak_kam import ConjugatePair, is_sub_action

from conftest import fk_pair, fk_solution, random_lipschitz


@pytest.mark.parametrize("c", [0.0, 0.3, 0.7])
def test_integrable_effective_interaction(integrable, c):
    rep = effective_interaction(integrable, c, n=4096)
    assert rep.converged
    assert abs(rep.s_bar + c * c / 2) <= 1e-5


def test_fk_zero_class_has_zero_interaction():
    _, _, rep = fk_solution()
    assert rep.converged
    assert abs(rep.s_bar) <= 1e-5


def test_fk_interaction_matches_high_resolution_run(fk):
    coarse = effective_interaction(fk, 0.4, n=4096)
    fine = effective_interaction(fk, 0.4, tol=1e-9, n=16384)
    assert coarse.converged and fine.converged
    assert abs(coarse.s_bar - fine.s_bar) <= 1e-4


def test_integrable_solution_is_constant(integrable):
    u, rep = weak_kam_backward(integrable, 0.3, n=4096)
    assert rep.converged
    assert u.values[0] == 0.0
    assert np.max(np.abs(u.values)) <= 1e-5


def test_fk_solution_residual_and_single_kink():
    for n in (2048, 4096):
        gf, u, rep = fk_solution(n=n)
        assert rep.converged and rep.residual <= 1e-9
        lo, hi = superdifferential_array(u)
        gap = hi - lo
        peak = int(np.argmax(gap))
        assert abs(u.nodes[peak] - 0.5) <= 2 / n
        # the gap peak is unique: everything outside a few cells is far below it
        far = np.abs(np.arange(n) - peak) > 4
        assert np.max(gap[far]) < 0.1 * gap[peak]
        rep_s = detect_singularities(u, sigma_plus_lift(u, gf, 0.0, rep.s_bar))
        assert len(rep_s.points) == 1


def test_fixed_point_property():
    gf, u, rep = fk_solution(c=0.3)
    tu = t_minus(u, gf, 0.3, with_gap=False).image
    assert np.max(np.abs(tu.values - rep.s_bar - u.values)) <= rep.residual + 1e-12
    assert np.max(np.abs(tu.values - u.values)) <= 1e-9 + abs(rep.s_bar)


def test_history_records_every_step():
    _, _, rep = fk_solution(c=0.3)
    assert len(rep.history) == rep.iterations + 1
    res = [r for _, _, r in rep.history]
    assert all(r >= 0 for r in res)
    tail = res[-10:]
    assert all(b <= a for a, b in zip(tail, tail[1:]))


def test_non_convergence_is_flagged(fk):
    u, rep = weak_kam_backward(fk, 0.3, max_iter=2, n=512)
    assert not rep.converged
    assert rep.iterations == 2
    assert rep.residual > 1e-7
    assert "FAILED" in rep.summary()
    assert u.n == 512


def test_invalid_tolerance(fk):
    with pytest.raises(ValueError):
        effective_interaction(fk, 0.0, tol=0.0, n=64)


def test_integrable_conjugate_pair(integrable):
    u, rep = weak_kam_backward(integrable, 0.3, n=1024)
    up, rep_p = conjugate_plus(u, integrable, 0.3, rep.s_bar)
    assert rep_p.converged
    assert np.max(np.abs(up.values)) <= 1e-6
    assert projected_aubry(ConjugatePair(u, up), 1e-4).size == 1024


def test_fk_conjugate_pair_ordering_and_contact():
    gf, um, up, rep, rep_p = fk_pair()
    assert rep_p.converged
    diff = um.values - up.values
    assert np.min(diff) >= -1e-6
    assert np.min(diff) == 0.0
    contact = np.flatnonzero(diff <= 1e-6)
    d = np.minimum(um.nodes[contact], 1 - um.nodes[contact])
    assert np.max(d) < 0.01


def test_forward_limit_identity():
    # lim T+^k [u-] + k S_bar agrees with lim T+^k T-^k [u-] up to a constant
    gf, um, up, rep, rep_p = fk_pair()
    v = t_plus_t_minus_n(um, gf, 0.0, 40)
    assert np.ptp(v.values - up.values) <= 2 * 1e-9


def test_projected_aubry_clusters_at_fixed_point():
    gf, um, up, _, _ = fk_pair()
    n = um.n
    idx = projected_aubry(ConjugatePair(um, up), 1e-4)
    x = um.nodes[idx]
    centre = np.angle(np.mean(np.exp(2j * np.pi * x))) / (2 * np.pi)
    assert abs(centre) <= 2 / n
    assert 0 in idx
    assert projected_aubry(ConjugatePair(um, up), 1e9).size == n
    with pytest.raises(ValueError):
        projected_aubry(ConjugatePair(um, up), 0.0)


def test_solution_is_differentiable_on_aubry_set():
    gf, um, up, _, _ = fk_pair()
    idx = projected_aubry(ConjugatePair(um, up), 1e-4)
    lo, hi = superdifferential_array(um)
    assert np.max(np.abs(hi - lo)[idx]) <= 10 / um.n


@pytest.mark.parametrize("c", [0.0, 0.25, -0.4])
def test_sub_action_property(c):
    gf, u, rep = fk_solution(c=c)
    assert is_sub_action(u, gf, c, rep.s_bar, n_pairs=5000) <= 1e-6


def test_gauge_independence(fk, rng):
    tol = 1e-8
    a = effective_interaction(fk, 0.3, tol=tol, n=1024)
    for _ in range(3):
        b = effective_interaction(fk, 0.3, u0=random_lipschitz(rng, 1024, amp=0.3), tol=tol)
        assert abs(a.s_bar - b.s_bar) <= 10 * tol


def test_monotone_convergence_from_sub_actions(rng):
    # at c = 0 constants are sub-actions (S >= 0 = S_bar), and so is any max of sub-actions
    n = 512
    for _ in range(10):
        gf = GeneratingFunction.frenkel_kontorova(rng.uniform(0.2, 2.0))
        um, _ = weak_kam_backward(gf, 0.0, tol=1e-11, n=n)
        s = min(0.0, float(np.min(t_minus(um, gf, 0.0, with_gap=False).image.values - um.values)))
        u = GridFunction(np.maximum(rng.uniform(0, um.values.max()), um.values + rng.normal() * 0.01))
        prev = u.values
        w = u
        for k in range(1, 16):
            w = t_minus(w, gf, 0.0, with_gap=False).image
            cur = w.values - k * s
            assert np.all(cur >= prev - 1e-9)
            prev = cur


def test_alpha_sweep_integrable(integrable):
    cs = np.round(np.arange(-0.5, 0.501, 0.1), 12)
    rows = alpha_sweep(integrable, cs, n=1024)
    assert [r.c for r in rows] == list(cs)
    for r in rows:
        assert r.converged
        assert abs(r.alpha - r.c**2 / 2) <= 1e-5
        assert abs(r.alpha_prime_fd - r.c) <= 1e-3
        assert abs(r.rho_sigma - r.c) <= 2e-3


def test_alpha_sweep_fk_rotation_is_monotone(fk):
    cs = np.linspace(-0.5, 0.5, 11)
    rows = alpha_sweep(fk, cs, n=1024)
    rho = [r.rho_sigma for r in rows]
    assert all(r.converged for r in rows)
    assert all(b >= a - 1e-3 for a, b in zip(rho, rho[1:]))
    # alpha is convex and even in c
    alpha = np.array([r.alpha for r in rows])
    assert np.all(np.diff(alpha, 2) >= -1e-7)
    assert np.allclose(alpha, alpha[::-1], atol=1e-6)


def test_alpha_sweep_rejects_unsorted(fk):
    with pytest.raises(ValueError):
        alpha_sweep(fk, [0.2, 0.1, 0.3], n=64)


def test_alpha_sweep_single_class(integrable):
    rows = alpha_sweep(integrable, [0.2], n=512)
    assert len(rows) == 1
    assert rows[0].alpha_prime_fd == pytest.approx(0.2, abs=1e-3)
