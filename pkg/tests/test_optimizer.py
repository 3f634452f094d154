import numpy as np
import pytest

from hardy_bellman.bellman_core import bellman_value
from hardy_bellman.extremal import build_g0, discretize_g0
from hardy_bellman.models import (
    AscentConfig,
    AscentRecord,
    AscentTrace,
    DomainError,
    InfeasibleProjectionError,
    MomentPair,
    PParams,
)
from hardy_bellman.monotone_fn import (
    StepFunction,
    geometric_grid,
    integral,
    lp_distance,
    p_moment,
    phi_functional,
)
from hardy_bellman.optimizer import (
    comovement,
    gradient,
    gradient_check,
    maximize,
    monotone_step,
    project,
    random_start,
    trace_violations,
)


def _separated(rng, cells):
    breakpoints = geometric_grid(cells, 1e-3)
    values = np.cumsum(rng.exponential(size=cells) + 0.01)[::-1]
    return StepFunction(breakpoints, values.copy())


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    params = PParams(2.0 if seed % 2 == 0 else 3.0)
    assert gradient_check(_separated(rng, 12), params, h=1e-6) <= 1e-5


def test_gradient_exact_and_quadrature_agree(rng):
    g = _separated(rng, 10)
    params = PParams(2.0)
    np.testing.assert_allclose(gradient(g, params, "exact"), gradient(g, params, "quad"), rtol=1e-8)


def test_g0_is_fixed_point_of_conditional_step(p2, moments_212):
    # For p = 2 the projected gradient of the discretized g0 points back at g0
    g0 = build_g0(p2, moments_212)
    g = discretize_g0(g0, 512, moments_212, p2)
    direction = gradient(g, p2) / g.widths
    image = project(direction, moments_212, p2, g.breakpoints)
    assert lp_distance(image, g, p2) <= 1e-2


def test_monotone_step_pools_violators():
    out = monotone_step([1.0, 3.0, 2.0], [1.0, 1.0, 1.0])
    np.testing.assert_allclose(out, [2.0, 2.0, 2.0])
    out = monotone_step([3.0, 1.0, 2.0], [0.5, 0.25, 0.25])
    np.testing.assert_allclose(out, [3.0, 1.5, 1.5])


def test_monotone_step_clips_negative():
    assert np.all(monotone_step([1.0, -2.0], [0.5, 0.5]) >= 0.0)


def test_project_lands_in_feasible_set(rng, p2, moments_212):
    grid = geometric_grid(64, 1e-4)
    out = project(0.1 * rng.normal(size=64) + grid[1:] ** -0.5, moments_212, p2, grid)
    assert np.all(np.diff(out.values) <= 0.0)
    assert integral(out) == pytest.approx(1.0, rel=1e-12)
    assert p_moment(out, p2) == pytest.approx(2.0, rel=1e-12)


def test_project_rejects_nonpositive(p2, moments_212):
    with pytest.raises(InfeasibleProjectionError):
        project(-np.ones(8), moments_212, p2, geometric_grid(8, 1e-3))


def test_random_start_is_seeded(p2, moments_212):
    grid = geometric_grid(32, 1e-6)
    a = random_start(AscentConfig(cells=32, seed=3), moments_212, p2, grid)
    b = random_start(AscentConfig(cells=32, seed=3), moments_212, p2, grid)
    np.testing.assert_array_equal(a.values, b.values)


def test_ascent_config_validation():
    with pytest.raises(DomainError):
        AscentConfig(cells=4)
    with pytest.raises(DomainError):
        AscentConfig(step_size=0.0)


def test_maximize_trivial_converges_immediately(p2):
    moments = MomentPair(1.0, 1.0)
    g, trace = maximize(AscentConfig(cells=16), p2, moments)
    assert trace.converged
    assert len(trace.records) == 1
    assert phi_functional(g, p2) == pytest.approx(1.0)


def test_maximize_improves_and_respects_ceiling(p2, moments_212):
    config = AscentConfig(cells=256, max_iters=150, seed=1)
    g, trace = maximize(config, p2, moments_212)
    bellman = bellman_value(p2, moments_212)
    accepted = [r.objective for r in trace.accepted()]
    assert accepted[-1] > accepted[0]
    assert trace_violations(trace) == []
    assert phi_functional(g, p2) <= bellman + 1e-8
    assert integral(g) == pytest.approx(1.0, rel=1e-12)
    assert p_moment(g, p2) == pytest.approx(2.0, rel=1e-12)


def test_maximize_is_deterministic(p2, moments_212):
    config = AscentConfig(cells=64, max_iters=30, seed=7)
    g1, t1 = maximize(config, p2, moments_212)
    g2, t2 = maximize(config, p2, moments_212)
    np.testing.assert_array_equal(g1.values, g2.values)
    assert t1.to_frame().equals(t2.to_frame())


def test_trace_frame_columns(p2, moments_212):
    _, trace = maximize(AscentConfig(cells=32, max_iters=5), p2, moments_212)
    frame = trace.to_frame()
    assert list(frame.columns) == ["iter", "objective", "defect", "lp_dist", "accepted"]
    assert frame["iter"].iloc[0] == 0


def test_trace_violations_detects_problems():
    trace = AscentTrace(bellman=1.0)
    trace.append(AscentRecord(0, 0.5, 0.1, 0.1, True, 0.0))
    trace.append(AscentRecord(1, 0.4, 0.1, 0.1, True, 0.1))
    trace.append(AscentRecord(2, 1.1, 0.1, 0.1, True, 0.1))
    problems = trace_violations(trace)
    assert len(problems) == 2


def test_comovement_needs_enough_points():
    trace = AscentTrace(bellman=1.0)
    for i in range(5):
        trace.append(AscentRecord(i, 0.5 + 0.01 * i, 0.1 - 0.01 * i, 0.0, True, 0.1))
    assert comovement(trace, burn_in=10) is None
    assert comovement(trace, burn_in=0) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gap_and_defect_move_together(p2, moments_212, seed):
    _, trace = maximize(AscentConfig(cells=256, max_iters=300, seed=seed), p2, moments_212)
    rho = comovement(trace)
    assert rho is not None
    assert rho >= 1.0 - 1e-12
