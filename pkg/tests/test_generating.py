import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistkam import (GeneratingFunction, InvalidModelError, TwistViolationError, d1, d2,
                      eval_s, standard_map, standard_map_inv, verify_hypotheses)
from twistkam.generating import noncrossing_margin, standard_map_array

FAMILIES = [
    GeneratingFunction.integrable(),
    GeneratingFunction.frenkel_kontorova(1.0),
    GeneratingFunction.frenkel_kontorova(2.5),
    GeneratingFunction.custom([0.02, -0.01, 0.005]),
]
reals = st.floats(-3, 3, allow_nan=False)
classes = st.floats(-1, 1, allow_nan=False)
families = st.sampled_from(FAMILIES)


def test_eval_s_examples(integrable, fk):
    assert eval_s(integrable, 0.0, 0.25, 0.25) == 0.0
    assert eval_s(integrable, 0.5, 0.0, 1.0) == 0.0
    assert eval_s(fk, 0.0, 0.5, 0.5) == pytest.approx(2 / (2 * math.pi) ** 2, abs=1e-15)
    assert eval_s(fk, 0.0, 0.5, 0.5) == pytest.approx(0.0506606, abs=1e-7)


def test_derivative_examples(integrable, fk):
    assert d1(integrable, 0.0, 0.7, 0.2) == pytest.approx(0.5, abs=1e-15)
    assert d2(integrable, 0.0, 0.7, 0.2) == pytest.approx(-0.5, abs=1e-15)
    assert d1(fk, 0.0, 0.25, 0.25) == pytest.approx(1 / (2 * math.pi), abs=1e-15)


def test_cohomology_shift_of_derivatives(fk):
    assert d1(fk, 0.3, 0.1, 0.6) == pytest.approx(d1(fk, 0.0, 0.1, 0.6) + 0.3)
    assert d2(fk, 0.3, 0.1, 0.6) == pytest.approx(d2(fk, 0.0, 0.1, 0.6) - 0.3)


@given(families, classes, reals, reals)
def test_derivatives_match_centered_differences(gf, c, x, y):
    h = 1e-5
    fd1 = (eval_s(gf, c, x + h, y) - eval_s(gf, c, x - h, y)) / (2 * h)
    fd2 = (eval_s(gf, c, x, y + h) - eval_s(gf, c, x, y - h)) / (2 * h)
    assert abs(d1(gf, c, x, y) - fd1) <= 1e-7
    assert abs(d2(gf, c, x, y) - fd2) <= 1e-7


def test_finite_difference_error_is_second_order():
    gf = GeneratingFunction.custom([0.05, 0.02])
    x, y = 0.3, 0.8
    errs = []
    for h in (1e-2, 5e-3):
        fd = (eval_s(gf, 0.1, x + h, y) - eval_s(gf, 0.1, x - h, y)) / (2 * h)
        errs.append(abs(fd - d1(gf, 0.1, x, y)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


@given(families, classes, reals, reals, st.integers(-5, 5))
def test_diagonal_periodicity(gf, c, x, y, m):
    s = eval_s(gf, c, x, y)
    assert abs(eval_s(gf, c, x + m, y + m) - s) <= 1e-12 * (1 + abs(s))


@given(families, classes, st.floats(0, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_noncrossing_margin_bound(gf, c, x1, x2, t1, t2):
    y1, y2 = x1 + t1, x2 + t2
    if (x1 - x2) * (y1 - y2) >= 0:
        return
    m = noncrossing_margin(gf, c, x1, x2, y1, y2)
    assert m >= gf.twist_eps * abs(x1 - x2) * abs(y1 - y2) - 1e-9


def test_noncrossing_quadruple(integrable):
    assert noncrossing_margin(integrable, 0.0, 0.0, 0.5, 0.5, 0.0) == pytest.approx(0.25)


@given(reals, reals)
def test_standard_map_integrable_is_shear(x, p):
    gf = GeneratingFunction.integrable()
    y, p2 = standard_map(gf, 0.0, x, p)
    assert y == pytest.approx(x + p, abs=1e-11)
    assert p2 == pytest.approx(p, abs=1e-11)
    xb, pb = standard_map_inv(gf, 0.0, x, p)
    assert xb == pytest.approx(x - p, abs=1e-11)
    assert pb == pytest.approx(p, abs=1e-11)


@given(st.floats(0.1, 3), reals, reals)
def test_standard_map_fk_closed_form(K, x, p):
    gf = GeneratingFunction.frenkel_kontorova(K)
    v1 = K / (2 * math.pi) * math.sin(2 * math.pi * x)
    y, p2 = standard_map(gf, 0.0, x, p)
    assert y == pytest.approx(x + p + v1, abs=1e-10)
    assert p2 == pytest.approx(p + v1, abs=1e-10)


@pytest.mark.parametrize("gf", FAMILIES, ids=lambda g: g.family.value)
def test_round_trip_on_random_points(gf, rng):
    worst_fwd = worst_bwd = 0.0
    for x, p, c in zip(rng.uniform(-2, 2, 1000), rng.uniform(-2, 2, 1000), rng.uniform(-1, 1, 1000)):
        y, p2 = standard_map(gf, c, x, p)
        xb, pb = standard_map_inv(gf, c, y, p2)
        worst_fwd = max(worst_fwd, abs(xb - x), abs(pb - p))
        x2, q2 = standard_map_inv(gf, c, x, p)
        yb, qb = standard_map(gf, c, x2, q2)
        worst_bwd = max(worst_bwd, abs(yb - x), abs(qb - p))
    assert worst_fwd <= 1e-9
    assert worst_bwd <= 1e-9


@given(families, classes, reals, reals)
def test_standard_map_equivariance(gf, c, y, p2):
    x0, q0 = standard_map_inv(gf, c, y, p2)
    x1, q1 = standard_map_inv(gf, c, y + 1, p2)
    assert x1 - x0 == pytest.approx(1.0, abs=1e-10)
    assert q1 == pytest.approx(q0, abs=1e-10)
    a, b = standard_map(gf, c, x0 + 1, q0)
    assert a - 1 == pytest.approx(y, abs=1e-10)


@given(families, classes, st.lists(st.tuples(reals, reals), min_size=1, max_size=20))
def test_vectorized_map_agrees_with_root_solve(gf, c, pts):
    x, p = np.array(pts).T
    ya, pa = standard_map_array(gf, c, x, p)
    for i in range(x.size):
        y, p2 = standard_map(gf, c, x[i], p[i])
        assert ya[i] == pytest.approx(y, abs=1e-10)
        assert pa[i] == pytest.approx(p2, abs=1e-10)


def test_hypotheses_integrable(integrable):
    rep = verify_hypotheses(integrable, 0.0, 2000)
    assert rep.all_pass
    assert rep.twist_margin == pytest.approx(1.0, abs=1e-6)


def test_hypotheses_fk(fk):
    rep = verify_hypotheses(fk, 0.0, 2000)
    assert rep.all_pass
    assert rep.twist_margin == pytest.approx(1.0, abs=1e-6)
    assert all("PASS" in line for line in rep.lines())


@pytest.mark.parametrize("c", [-0.7, 0.0, 0.45])
def test_hypotheses_hold_across_classes(fk, c):
    assert verify_hypotheses(fk, c, 500).all_pass


def test_negative_coupling_fails_twist():
    gf = GeneratingFunction.custom([0.01], coupling=-1.0)
    rep = verify_hypotheses(gf)
    assert not rep.twist_ok
    assert not rep.all_pass
    with pytest.raises(TwistViolationError):
        standard_map(gf, 0.0, 0.1, 0.2)


def test_invalid_models():
    with pytest.raises(InvalidModelError):
        GeneratingFunction.frenkel_kontorova(float("nan"))
    with pytest.raises(InvalidModelError):
        GeneratingFunction.custom([1.0, float("inf")])
    with pytest.raises(InvalidModelError):
        GeneratingFunction.integrable(window=-1.0)
    with pytest.raises(InvalidModelError):
        eval_s(GeneratingFunction.integrable(), float("nan"), 0.0, 0.0)


def test_default_window():
    gf = GeneratingFunction.integrable(twist_eps=0.5)
    assert gf.window_for(0.3) == pytest.approx(2.6)
    assert GeneratingFunction.integrable(window=1.5).window_for(0.3) == 1.5


def test_generating_function_is_immutable(fk):
    with pytest.raises(Exception):
        fk.coupling = 2.0
