import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardy_bellman.bellman_core import (
    bellman_ceiling,
    bellman_value,
    check_feasible,
    hp_derivative,
    hp_eval,
    is_trivial,
    lp_constant,
    omega_p,
)
from hardy_bellman.models import DomainError, MomentPair, PParams


def test_hp_endpoints(p2):
    assert hp_eval(p2, 1.0) == 1.0
    assert hp_eval(p2, 2.0) == 0.0
    assert hp_eval(PParams(3.0), 1.5) == pytest.approx(0.0, abs=1e-15)


def test_hp_outside_bracket(p2):
    with pytest.raises(DomainError):
        hp_eval(p2, 0.5)
    with pytest.raises(DomainError):
        hp_eval(p2, 2.5)


def test_hp_derivative_negative_inside(p2):
    assert hp_derivative(p2, 1.0) == 0.0
    assert hp_derivative(p2, 1.5) < 0.0


def test_omega_trivial_is_exact():
    for p in (1.5, 2.0, 3.0, 5.0):
        assert omega_p(PParams(p), 1.0).c == 1.0


def test_omega_quadratic_root(p2):
    assert omega_p(p2, 0.5).c == pytest.approx(1.0 + math.sqrt(2.0) / 2.0, abs=1e-14)


def test_omega_near_zero_approaches_conjugate():
    for p in (1.5, 2.0, 3.0, 5.0):
        params = PParams(p)
        assert abs(omega_p(params, 1e-10).c - params.conjugate) <= 1e-4


@pytest.mark.parametrize("x", [0.0, -0.1, 1.5, float("nan")])
def test_omega_rejects_bad_ratio(p2, x):
    with pytest.raises(DomainError):
        omega_p(p2, x)


@given(p=st.sampled_from([1.5, 2.0, 3.0, 5.0]), log_x=st.floats(min_value=-6.0, max_value=0.0))
def test_inverse_residual(p, log_x):
    params = PParams(p)
    x = 10.0 ** log_x
    c = omega_p(params, x).c
    assert 1.0 <= c <= params.conjugate
    assert abs(hp_eval(params, c) - x) <= 1e-12


def test_omega_is_decreasing_in_x(p2):
    xs = np.logspace(-6, 0, 50)
    cs = [omega_p(p2, float(x)).c for x in xs]
    assert all(b <= a for a, b in zip(cs, cs[1:]))


def test_bellman_closed_forms(p2):
    assert bellman_value(p2, MomentPair(1.0, 2.0)) == pytest.approx(3.0 + 2.0 * math.sqrt(2.0), rel=1e-12)
    assert bellman_value(p2, MomentPair(1.0, 1.25)) == pytest.approx(1.25 * (1.0 + math.sqrt(0.2)) ** 2,
                                                                      rel=1e-12)


def test_bellman_trivial_case(p2):
    assert bellman_value(p2, MomentPair(1.0, 1.0)) == 1.0
    assert is_trivial(p2, MomentPair(2.0, 4.0))


def test_infeasible_message(p2):
    with pytest.raises(DomainError, match=r"infeasible: f\^p > F"):
        bellman_value(p2, MomentPair(2.0, 1.0))


def test_feasibility_slack_clamps(p2):
    assert check_feasible(p2, MomentPair(1.0, 1.0 - 1e-14)) == 1.0


def test_p_at_one_rejected():
    with pytest.raises(DomainError):
        PParams(1.0)


@given(lam=st.floats(min_value=0.1, max_value=10.0), ratio=st.floats(min_value=1.0, max_value=50.0))
def test_bellman_scaling(lam, ratio):
    params = PParams(2.0)
    base = bellman_value(params, MomentPair(1.0, ratio))
    scaled = bellman_value(params, MomentPair(lam, lam ** 2 * ratio))
    assert scaled == pytest.approx(lam ** 2 * base, rel=1e-10)


@given(p=st.sampled_from([1.5, 2.0, 3.0]), ratio=st.floats(min_value=1.001, max_value=1e4))
def test_bellman_between_F_and_ceiling(p, ratio):
    params = PParams(p)
    moments = MomentPair(1.0, ratio)
    value = bellman_value(params, moments)
    assert moments.F <= value < bellman_ceiling(params, moments)


def test_lp_constant():
    assert lp_constant(PParams(2.0)) == 2.0
    assert lp_constant(PParams(3.0)) == 1.5
