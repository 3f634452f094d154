"""
Constrained Ascent
Projected-gradient ascent of Phi_p over non-increasing step functions on a fixed grid with
the two moment constraints held exactly.

Projection is pool-adjacent-violators (weighted by cell length) followed by the affine
moment renormalization; the composition lands in the feasible set because the affine map
keeps monotonicity.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import isotonic_regression

from .bellman_core import bellman_value, is_trivial
from .extremal import build_g0, discretize_g0, rank_correlation, reference_grid
from .models import (
    AscentConfig,
    AscentRecord,
    AscentTrace,
    InfeasibleProjectionError,
    MomentPair,
    PParams,
)
from .monotone_fn import StepFunction, defect, lp_distance, phi_functional, renormalize_moments
from .quadrature import cell_integrals

logger = logging.getLogger(__name__)

# Steps below this size cannot change the iterate in double precision
MIN_STEP = 1e-14


def gradient(g: StepFunction, params: PParams, method: str = "auto") -> np.ndarray:
    """
    Partial derivatives of Phi_p with respect to the cell values.

    Component i is p * (K_i - t_{i-1} J_i + dt_i * sum_{j>i} J_j) where, on cell j,
    K_j integrates (Hg)^(p-1) and J_j integrates (Hg)^(p-1)/t.
    """
    p = params.p
    t, v, a = g.breakpoints, g.values, g.hardy_offsets
    dt = g.widths
    if p < 2.0 and np.any(v <= 0.0):
        logger.warning(f"gradient with p={p} on a function with {int(np.sum(v <= 0))} zero cells")

    K = np.empty(g.n)
    J = np.zeros(g.n)
    K[0] = v[0] ** (p - 1.0) * t[1]
    if g.n > 1:
        lo, hi = t[1:-1], t[2:]
        K[1:] = cell_integrals(v[1:], a[1:], lo, hi, p - 1.0, shift=0, method=method)
        J[1:] = cell_integrals(v[1:], a[1:], lo, hi, p - 1.0, shift=1, method=method)

    # suffix[i] = sum of J_j over j > i; J_1 is never needed
    suffix = np.concatenate([np.cumsum(J[::-1])[::-1][1:], [0.0]])
    own = K - t[:-1] * J
    own[0] = K[0]
    return p * (own + dt * suffix)


def gradient_check(g: StepFunction, params: PParams, h: float = 1e-6,
                   method: str = "exact") -> float:
    """Max deviation of the gradient from central differences of step h, relative to its max."""
    analytic = gradient(g, params, method=method)
    numeric = np.empty(g.n)
    for i in range(g.n):
        up, down = g.values.copy(), g.values.copy()
        up[i] += h
        down[i] -= h
        numeric[i] = (phi_functional(StepFunction(g.breakpoints, up), params, method)
                      - phi_functional(StepFunction(g.breakpoints, down), params, method)) / (2.0 * h)
    return float(np.max(np.abs(analytic - numeric)) / np.max(np.abs(analytic)))


def monotone_step(v: Sequence[float], widths: Sequence[float]) -> np.ndarray:
    """Weighted pool-adjacent-violators fit of v by a non-increasing vector."""
    result = isotonic_regression(np.asarray(v, dtype=float),
                                 weights=np.asarray(widths, dtype=float), increasing=False)
    return np.maximum(result.x, 0.0)


def project(v: Sequence[float], target: MomentPair, params: PParams,
            breakpoints: np.ndarray) -> StepFunction:
    """
    Map a vector of cell values onto the feasible set.

    Raises:
        InfeasibleProjectionError: the pooled shape cannot reach the target moments
    """
    breakpoints = np.asarray(breakpoints, dtype=float)
    values = monotone_step(v, np.diff(breakpoints))
    if not np.any(values > 0.0):
        raise InfeasibleProjectionError("projection of a nonpositive vector")
    return renormalize_moments(StepFunction(breakpoints, values), target, params)


def random_start(config: AscentConfig, target: MomentPair, params: PParams,
                 breakpoints: np.ndarray) -> StepFunction:
    """Sorted exponential samples, projected; squared once if the first shape is too flat."""
    rng = np.random.default_rng(config.seed)
    samples = np.sort(rng.exponential(size=len(breakpoints) - 1))[::-1]
    try:
        return project(samples, target, params, breakpoints)
    except InfeasibleProjectionError:
        logger.warning(f"Seed {config.seed}: start too flat for the target, sharpening once")
        return project(samples ** 2, target, params, breakpoints)


def maximize(config: AscentConfig, params: PParams, target: MomentPair,
             method: str = "auto") -> Tuple[StepFunction, AscentTrace]:
    """
    Projected-gradient ascent with backtracking.

    Steps move along the L^2 gradient (partials divided by cell lengths). A rejected step
    (lower objective or infeasible projection) halves the step size; grow_after
    consecutive accepts double it, capped at max_step.

    Returns:
        (best iterate, trace); trace.converged is False when max_iters ran out
    """
    bellman = bellman_value(params, target)
    trace = AscentTrace(bellman=bellman)
    g0 = build_g0(params, target)

    if is_trivial(params, target):
        best = StepFunction.constant(target.f, reference_grid(g0, params, config.cells))
        trace.append(AscentRecord(0, phi_functional(best, params, method), 0.0, 0.0, True, 0.0))
        trace.converged = True
        return best, trace

    grid = reference_grid(g0, params, config.cells)
    reference = discretize_g0(g0, config.cells, target, params)

    def record(iteration: int, g: StepFunction, objective: float, accepted: bool, step: float):
        trace.append(AscentRecord(
            iteration=iteration,
            objective=objective,
            defect=defect(g, g0.c, params, method).value,
            lp_dist=lp_distance(g, reference, params),
            accepted=accepted,
            step=step,
        ))

    current = random_start(config, target, params, grid)
    objective = phi_functional(current, params, method)
    record(0, current, objective, True, 0.0)

    step, streak = config.step_size, 0
    dt = current.widths
    for iteration in range(1, config.max_iters + 1):
        direction = gradient(current, params, method) / dt
        try:
            trial = project(current.values + step * direction, target, params, grid)
            trial_objective = phi_functional(trial, params, method)
        except InfeasibleProjectionError:
            trial, trial_objective = None, -np.inf

        if trial is not None and trial_objective > objective:
            gain = trial_objective - objective
            current, objective = trial, trial_objective
            record(iteration, current, objective, True, step)
            if objective > bellman + 1e-8:
                logger.warning(f"Iterate {iteration} exceeds the Bellman value by {objective - bellman:.3e}")
            streak += 1
            if streak >= config.grow_after:
                step, streak = min(2.0 * step, config.max_step), 0
            if gain < config.tol_obj:
                trace.converged = True
                break
        else:
            record(iteration, current, objective, False, step)
            step, streak = step / 2.0, 0
            if step < MIN_STEP:
                trace.converged = True
                break

    if not trace.converged:
        logger.warning(f"Ascent did not converge in {config.max_iters} iterations "
                       f"(objective {objective:.12g}, Bellman {bellman:.12g})")
    logger.info(f"Seed {config.seed}: objective {objective:.12g} / {bellman:.12g} "
                f"after {len(trace.records) - 1} iterations")
    return current, trace


def comovement(trace: AscentTrace, burn_in: int = 10) -> Optional[float]:
    """Rank correlation of (B - objective) and defect over accepted iterations after burn_in."""
    rows = [r for r in trace.accepted() if r.iteration > burn_in]
    if len(rows) < 3:
        return None
    gaps = [trace.bellman - r.objective for r in rows]
    return rank_correlation(gaps, [r.defect for r in rows])


def trace_violations(trace: AscentTrace, ceiling_tol: float = 1e-8) -> List[str]:
    """Monotone-ascent and Bellman-ceiling violations among the accepted iterates."""
    accepted = [r.objective for r in trace.accepted()]
    problems = []
    if any(b < a for a, b in zip(accepted, accepted[1:])):
        problems.append("accepted objectives decreased")
    if accepted and max(accepted) > trace.bellman + ceiling_tol:
        problems.append(f"objective exceeded the Bellman value by {max(accepted) - trace.bellman:.3e}")
    return problems
