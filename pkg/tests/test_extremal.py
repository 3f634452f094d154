import math

import numpy as np
import pandas as pd
import pytest

from hardy_bellman.bellman_core import bellman_value
from hardy_bellman.extremal import (
    DEFAULT_T_MIN,
    auto_t_min,
    build_g0,
    discretize_g0,
    eigen_identity_check,
    make_sequence,
    mollification_t_min,
    power_law_tail,
    rank_correlation,
    sequence_series,
    tail_profile,
    tail_table,
    tail_violations,
    truncation_height,
)
from hardy_bellman.models import DomainError, ExtremalSequenceSpec, MomentPair, PParams
from hardy_bellman.monotone_fn import (
    defect,
    integral,
    lp_distance,
    p_moment,
    phi_functional,
    tail_mass,
)


def test_g0_parameters(p2, moments_212):
    g0 = build_g0(p2, moments_212)
    c = 1.0 + math.sqrt(2.0) / 2.0
    assert g0.c == pytest.approx(c, abs=1e-14)
    assert g0.k == pytest.approx(1.0 / c, abs=1e-14)
    assert g0.e == pytest.approx(-1.0 + 1.0 / c, abs=1e-14)


def test_g0_trivial(p2):
    g0 = build_g0(p2, MomentPair(1.5, 2.25))
    assert (g0.k, g0.e, g0.c) == (1.5, 0.0, 1.0)


def test_g0_moments_in_closed_form():
    for p in (1.5, 2.0, 3.0):
        params = PParams(p)
        moments = MomentPair(1.0, 3.0 if p == 1.5 else 2.0)
        g0 = build_g0(params, moments)
        assert g0.integral() == pytest.approx(moments.f, rel=1e-12)
        assert g0.p_moment(params) == pytest.approx(moments.F, rel=1e-10)


def test_g0_infeasible(p2):
    with pytest.raises(DomainError):
        build_g0(p2, MomentPair(2.0, 1.0))


@pytest.mark.parametrize("t", [1e-6, 0.01, 0.3, 1.0])
def test_eigen_identity(p2, moments_212, t):
    g0 = build_g0(p2, moments_212)
    assert eigen_identity_check(g0, g0.c, t) <= 1e-12 * g0.c * g0(t)


def test_eigen_identity_rejects_zero(p2, moments_212):
    with pytest.raises(DomainError):
        eigen_identity_check(build_g0(p2, moments_212), 1.5, 0.0)


def test_auto_t_min(p2, moments_212):
    g0 = build_g0(p2, moments_212)
    t_min = auto_t_min(g0, p2)
    assert t_min <= DEFAULT_T_MIN
    assert power_law_tail(g0, p2, t_min) / g0.p_moment(p2) == pytest.approx(1e-8, rel=1e-6)


def test_discretize_rejects_one_cell(p2, moments_212):
    with pytest.raises(DomainError):
        discretize_g0(build_g0(p2, moments_212), 1, moments_212, p2)


def test_discretize_trivial_is_constant(p2):
    moments = MomentPair(1.0, 1.0)
    g = discretize_g0(build_g0(p2, moments), 16, moments, p2)
    assert np.all(g.values == 1.0)
    assert phi_functional(g, p2) == pytest.approx(1.0, rel=1e-14)


def test_discretize_moments_exact(p2, moments_212):
    g = discretize_g0(build_g0(p2, moments_212), 512, moments_212, p2)
    assert integral(g) == pytest.approx(1.0, rel=1e-12)
    assert p_moment(g, p2) == pytest.approx(2.0, rel=1e-12)


def test_discretize_attains_bellman(p2, moments_212):
    g0 = build_g0(p2, moments_212)
    g = discretize_g0(g0, 4096, moments_212, p2)
    bellman = bellman_value(p2, moments_212)
    assert bellman == pytest.approx(3.0 + 2.0 * math.sqrt(2.0), rel=1e-12)
    assert phi_functional(g, p2) == pytest.approx(bellman, rel=1e-2)
    assert defect(g, g0.c, p2).value <= 1e-2


def test_finer_grid_lowers_defect(p2, moments_212):
    g0 = build_g0(p2, moments_212)
    coarse = discretize_g0(g0, 256, moments_212, p2)
    fine = discretize_g0(g0, 4096, moments_212, p2)
    assert defect(fine, g0.c, p2).value < defect(coarse, g0.c, p2).value


def test_truncation_height_rules(p2, moments_212):
    g0 = build_g0(p2, moments_212)
    assert truncation_height(g0, p2, 16, "time") == pytest.approx(g0(1.0 / 16))
    tau = 16.0 ** (-1.0 / (1.0 + 2.0 * g0.e))
    assert truncation_height(g0, p2, 16, "mass") == pytest.approx(g0(tau))


@pytest.mark.parametrize("kind", ExtremalSequenceSpec.KINDS)
def test_sequence_members_are_feasible(p2, moments_212, kind):
    g = make_sequence(ExtremalSequenceSpec(kind, 64, p2, moments_212, cells=1024))
    assert integral(g) == pytest.approx(1.0, rel=1e-12)
    assert p_moment(g, p2) == pytest.approx(2.0, rel=1e-12)
    assert phi_functional(g, p2) <= bellman_value(p2, moments_212) * (1.0 + 1e-12)


def test_sequence_trivial_is_constant(p2):
    moments = MomentPair(1.0, 1.0)
    g = make_sequence(ExtremalSequenceSpec("truncation", 8, p2, moments, cells=64))
    assert np.all(g.values == 1.0)


def test_sequence_spec_validation(p2, moments_212):
    with pytest.raises(DomainError):
        ExtremalSequenceSpec("smoothing", 4, p2, moments_212)
    with pytest.raises(DomainError):
        ExtremalSequenceSpec("truncation", 4, p2, moments_212, cutoff="height")


def test_truncation_series_decays(p2, moments_212):
    schedule = [2 ** k for k in range(4, 11, 2)]
    series = sequence_series(p2, moments_212, "truncation", schedule, cells=4096, workers=2)
    assert list(series.columns) == ["n", "phi", "gap", "defect", "lp_dist"]
    assert list(series["n"]) == schedule
    for column in ("gap", "defect", "lp_dist"):
        values = list(series[column])
        assert all(b < a for a, b in zip(values, values[1:])), column
    assert rank_correlation(series["gap"], series["defect"]) == 1.0


def test_tail_profile_is_sup_over_members(p2, moments_212):
    members = [make_sequence(ExtremalSequenceSpec("truncation", n, p2, moments_212, cells=1024))
               for n in (16, 64)]
    observed = tail_profile(members, p2, [1e-2])
    assert observed[0] == max(tail_mass(g, p2, 1e-2) for g in members)


def test_tail_equi_integrability_over_all_families(p2, moments_212):
    q = 1.0 + 2.0 * build_g0(p2, moments_212).e
    table = tail_table(p2, moments_212, [16, 256, 4096], [1e-2, 1e-4, 1e-6], cells=2 ** 14)
    assert list(table.columns) == ["delta", "sup_tail", "g0_tail", "bound"]
    sup = list(table["sup_tail"])
    assert all(b < a for a, b in zip(sup, sup[1:]))
    for row in table.itertuples(index=False):
        assert row.g0_tail == pytest.approx(2.0 * row.delta ** q)
        assert row.sup_tail <= 1.1 * row.g0_tail
    assert tail_violations(table) == []


def test_tail_violations_flags_excess():
    table = pd.DataFrame({"delta": [1e-2, 1e-4], "sup_tail": [0.5, 0.6], "g0_tail": [1.0, 0.5],
                          "bound": [1.1, 0.55]})
    problems = tail_violations(table)
    assert len(problems) == 2
    assert "0.6 > 0.55" in problems[0]


def test_mollification_grid_start(p2, moments_212):
    g0 = build_g0(p2, moments_212)
    q = 1.0 + 2.0 * g0.e
    assert mollification_t_min(g0, p2, 16) == pytest.approx(16.0 ** (-1.5 / q), rel=1e-12)
    assert mollification_t_min(g0, p2, 2 ** 40) == auto_t_min(g0, p2)
    member = make_sequence(ExtremalSequenceSpec("mollification", 16, p2, moments_212))
    assert member.n == 16
    assert member.breakpoints[1] == pytest.approx(16.0 ** (-1.5 / q), rel=1e-12)


def test_lp_distance_to_reference_shrinks(p2, moments_212):
    g0 = build_g0(p2, moments_212)
    reference = discretize_g0(g0, 2048, moments_212, p2)
    far = make_sequence(ExtremalSequenceSpec("mollification", 8, p2, moments_212))
    near = make_sequence(ExtremalSequenceSpec("mollification", 512, p2, moments_212))
    assert lp_distance(near, reference, p2) < lp_distance(far, reference, p2)


def test_rank_correlation_short_series():
    assert math.isnan(rank_correlation([1.0, 2.0], [2.0, 1.0]))
    assert rank_correlation([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
