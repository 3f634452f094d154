"""
Acceptance Suite
Named suites of numeric checks run by the verify command. Each check records a value, the
bound it is held to and a pass flag; any failed check fails the run.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional

import numpy as np

from .bellman_core import bellman_ceiling, bellman_value, hp_eval, omega_p
from .config import ExperimentConfig, LabSettings
from .dyadic_sim import (
    AlphaTree,
    DyadicTree,
    average_identity_check,
    build_phi_a,
    maximal_operator,
    random_leaf_function,
    sandwich,
    symmetrization_check,
)
from .experiments import (
    EXTREMAL_CELLS,
    OPTIMIZE_CELLS,
    SEQUENCE_SCHEDULE,
    SIMULATE_CELLS,
    TAIL_DELTAS,
    TAIL_SCHEDULE,
    cmd_bellman,
    cmd_extremal,
    cmd_simulate,
    hand_instance,
    new_report,
)
from .extremal import (
    build_g0,
    discretize_g0,
    eigen_identity_check,
    rank_correlation,
    sequence_series,
    tail_table,
    tail_violations,
)
from .models import AcceptanceFailure, AscentConfig, DomainError, MomentPair, PParams, RunReport
from .monotone_fn import (
    StepFunction,
    decreasing_rearrangement,
    defect,
    integral,
    lp_distance,
    p_moment,
    phi_functional,
)
from .optimizer import gradient_check, maximize, trace_violations
from .reporting import scalar_results

logger = logging.getLogger(__name__)

INVERSE_EXPONENTS = [1.5, 2.0, 3.0, 5.0]
ATTAINMENT_TRIPLES = [(2.0, 1.0, 2.0), (2.0, 1.0, 1.25), (3.0, 1.0, 2.0), (1.5, 1.0, 3.0)]
SYMMETRIZATION_EXPONENTS = [2.0, 3.0]
IDENTITY_PAIRS = 20
PROPERTY_SAMPLES = 50
GRADIENT_INSTANCES = 20
GRADIENT_EXPONENTS = [2.0, 3.0]
DETERMINISM_CELLS = 2 ** 12


class CheckLog:
    """Ordered collection of named check outcomes."""

    def __init__(self):
        self.results: Dict[str, Dict] = {}

    def check(self, name: str, passed: bool, value: float, bound: float, detail: str = ""):
        passed = bool(passed)
        self.results[name] = {
            "passed": passed,
            "value": float(value),
            "bound": float(bound),
            "detail": detail or f"{value:.6g} vs {bound:.6g}",
        }
        (logger.info if passed else logger.error)(
            f"[{'OK' if passed else 'FAIL'}] {name}: {self.results[name]['detail']}")

    @property
    def failed(self) -> List[str]:
        return [name for name, r in self.results.items() if not r["passed"]]


def random_step_function(rng: np.random.Generator, cells: int, min_gap: float = 0.0) -> StepFunction:
    """Sorted exponential values on sorted uniform breakpoints; neighbours differ by >= min_gap."""
    inner = np.sort(rng.uniform(0.0, 1.0, size=cells - 1))
    breakpoints = np.concatenate([[0.0], inner, [1.0]])
    if np.any(np.diff(breakpoints) <= 0.0):
        breakpoints = np.linspace(0.0, 1.0, cells + 1)
    steps = rng.exponential(size=cells) + min_gap
    values = np.cumsum(steps)[::-1]
    return StepFunction(breakpoints, values.copy())


def _strictly_decreasing(values) -> bool:
    values = list(values)
    return all(b < a for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def suite_bellman(log: CheckLog, config: ExperimentConfig, settings: LabSettings):
    tol = config.tolerances
    xs = np.logspace(-6.0, 0.0, 1000)
    for p in INVERSE_EXPONENTS:
        params = PParams(p)
        worst = max(abs(hp_eval(params, omega_p(params, float(x)).c) - x) for x in xs)
        log.check(f"inverse_residual_p{p:g}", worst <= tol.inverse_residual, worst, tol.inverse_residual)
        exact_one = omega_p(params, 1.0).c
        log.check(f"omega_one_p{p:g}", exact_one == 1.0, exact_one, 1.0)
        near_zero = abs(omega_p(params, 1e-10).c - params.conjugate)
        log.check(f"omega_limit_p{p:g}", near_zero <= tol.omega_limit, near_zero, tol.omega_limit)

    params = PParams(2.0)
    cases = {
        "bellman_2_1_2": (MomentPair(1.0, 2.0), 3.0 + 2.0 * np.sqrt(2.0)),
        "bellman_2_1_1.25": (MomentPair(1.0, 1.25), 1.25 * (1.0 + np.sqrt(0.2)) ** 2),
    }
    for name, (moments, expected) in cases.items():
        err = abs(bellman_value(params, moments) - expected) / expected
        log.check(name, err <= tol.bellman_closed_form, err, tol.bellman_closed_form)


def suite_extremal(log: CheckLog, config: ExperimentConfig, settings: LabSettings):
    tol = config.tolerances
    cells = config.cells or EXTREMAL_CELLS
    samples = np.geomspace(1e-6, 1.0, 100)
    for p, f, F in ATTAINMENT_TRIPLES:
        params, moments = PParams(p), MomentPair(f, F)
        tag = f"{p:g}_{f:g}_{F:g}"
        g0 = build_g0(params, moments)
        bellman = bellman_value(params, moments)
        g = discretize_g0(g0, cells, moments, params)

        gap = abs(bellman - phi_functional(g, params, method=config.method)) / bellman
        log.check(f"attainment_{tag}", gap <= tol.attainment, gap, tol.attainment)

        d = defect(g, g0.c, params, method=config.method).value
        if params.is_integer:
            log.check(f"defect_{tag}", d <= tol.defect, d, tol.defect)
        else:
            log.check(f"defect_{tag}", d <= tol.defect_relative * bellman, d,
                      tol.defect_relative * bellman)

        worst = max(eigen_identity_check(g0, g0.c, float(t)) / (g0.c * float(g0(t))) for t in samples)
        log.check(f"eigen_identity_{tag}", worst <= tol.eigen_identity, worst, tol.eigen_identity)


def suite_sequences(log: CheckLog, config: ExperimentConfig, settings: LabSettings):
    tol = config.tolerances
    params, moments = PParams(2.0), MomentPair(1.0, 2.0)
    series = sequence_series(params, moments, "truncation", SEQUENCE_SCHEDULE,
                             cells=config.cells or EXTREMAL_CELLS, cutoff=config.cutoff,
                             method=config.method, workers=settings.WORKERS)

    log.check("gap_decreasing", _strictly_decreasing(series["gap"]), series["gap"].iloc[-1], 0.0,
              f"gap {series['gap'].iloc[0]:.3e} -> {series['gap'].iloc[-1]:.3e}")
    log.check("defect_decreasing", _strictly_decreasing(series["defect"]),
              series["defect"].iloc[-1], 0.0,
              f"defect {series['defect'].iloc[0]:.3e} -> {series['defect'].iloc[-1]:.3e}")
    rho = rank_correlation(series["gap"], series["defect"])
    log.check("gap_defect_rank_correlation", rho == 1.0, rho, 1.0)
    ratio = series["defect"].iloc[-1] / series["defect"].iloc[0]
    log.check("defect_decay", ratio <= tol.defect_decay, ratio, tol.defect_decay)
    log.check("lp_decreasing", _strictly_decreasing(series["lp_dist"]),
              series["lp_dist"].iloc[-1], 0.0)
    final = series["lp_dist"].iloc[-1]
    log.check("lp_convergence", final <= tol.lp_convergence, final, tol.lp_convergence)

    tail = tail_table(params, moments, TAIL_SCHEDULE, TAIL_DELTAS,
                      cells=config.cells or EXTREMAL_CELLS, cutoff=config.cutoff)
    problems = tail_violations(tail)
    log.check("tail_equi_integrability", not problems, float(tail["sup_tail"].iloc[-1]),
              float(tail["bound"].iloc[-1]), "; ".join(problems) or "sup tail within bound")


def suite_optimizer(log: CheckLog, config: ExperimentConfig, settings: LabSettings):
    tol = config.tolerances
    params, moments = PParams(2.0), MomentPair(1.0, 2.0)
    cells = OPTIMIZE_CELLS
    bellman = bellman_value(params, moments)
    reference = discretize_g0(build_g0(params, moments), cells, moments, params)

    def run(seed: int):
        ascent = AscentConfig(cells=cells, max_iters=config.max_iters, step_size=config.step_size,
                              tol_obj=config.tol_obj, seed=seed)
        return maximize(ascent, params, moments, method=config.method)

    seeds = [config.seed + i for i in range(config.runs)]
    with ThreadPoolExecutor(max_workers=settings.WORKERS) as executor:
        outcomes = list(executor.map(run, seeds))

    for seed, (final, trace) in zip(seeds, outcomes):
        ratio = phi_functional(final, params, method=config.method) / bellman
        log.check(f"attainment_seed{seed}", ratio >= tol.optimizer_attainment, ratio,
                  tol.optimizer_attainment)
        dist = lp_distance(final, reference, params)
        log.check(f"lp_dist_seed{seed}", dist <= tol.optimizer_lp, dist, tol.optimizer_lp)
        problems = trace_violations(trace, tol.bellman_ceiling)
        log.check(f"ceiling_seed{seed}", not problems, len(problems), 0.0,
                  "; ".join(problems) or "no violations")


def suite_dyadic(log: CheckLog, config: ExperimentConfig, settings: LabSettings):
    tol = config.tolerances
    rng = np.random.default_rng(config.seed)

    lhs, rhs = hand_instance(PParams(2.0))
    log.check("hand_instance", lhs == 5.5 and rhs == 7.0, lhs, 5.5, f"(lhs, rhs) = ({lhs!r}, {rhs!r})")

    tree = DyadicTree(8)
    for p in SYMMETRIZATION_EXPONENTS:
        params = PParams(p)
        violations = 0
        for _ in range(config.samples):
            lhs, rhs = symmetrization_check(tree, random_leaf_function(8, rng), params,
                                            method=config.method)
            violations += lhs > rhs + tol.symmetrization
        log.check(f"symmetrization_p{p:g}", violations == 0, violations, 0.0,
                  f"{violations} violations in {config.samples} samples")

    worst = 0.0
    for _ in range(IDENTITY_PAIRS):
        a = float(rng.uniform(0.05, 0.5))
        g = random_step_function(rng, int(rng.integers(2, 64)))
        alpha = AlphaTree.build(a)
        phi_a = build_phi_a(alpha, g)
        worst = max(worst, max(average_identity_check(alpha, phi_a, g, m)
                               for m in range(alpha.depth + 2)))
    log.check("average_identity", worst <= tol.average_identity, worst, tol.average_identity)

    params, moments = PParams(2.0), MomentPair(1.0, 2.0)
    g = discretize_g0(build_g0(params, moments), SIMULATE_CELLS, moments, params)
    schedule = list(config.a_schedule)
    trees = [AlphaTree.build(a) for a in schedule]
    results = [sandwich(alpha, g, params, method=config.method) for alpha in trees]

    slack = 1.0 + tol.sandwich_order
    ordered = all(r.lower <= r.tree_value * slack and r.tree_value <= r.upper * slack
                  for r in results)
    log.check("sandwich_order", ordered, len(results), len(results))
    final = results[-1].relative_gap
    log.check("sandwich_gap", final <= tol.sandwich_gap, final, tol.sandwich_gap)
    log.check("sandwich_gap_decreasing", _strictly_decreasing(r.gap for r in results), final, 0.0,
              ", ".join(f"{r.gap:.3e}" for r in results))


def suite_invariants(log: CheckLog, config: ExperimentConfig, settings: LabSettings):
    tol = config.tolerances
    rng = np.random.default_rng(config.seed + 1)

    params, moments = PParams(2.0), MomentPair(1.0, 2.0)
    lam = 1.7
    scaled = bellman_value(params, MomentPair(lam * 1.0, lam ** 2 * 2.0))
    err = abs(scaled - lam ** 2 * bellman_value(params, moments)) / scaled
    log.check("bellman_scaling", err <= tol.scaling, err, tol.scaling)

    ceiling_ok = bellman_value(params, moments) < bellman_ceiling(params, moments)
    log.check("bellman_ceiling", ceiling_ok, bellman_value(params, moments),
              bellman_ceiling(params, moments))

    worst_scaling, worst_moments, dominated, bounded = 0.0, 0.0, True, True
    for i in range(PROPERTY_SAMPLES):
        params = PParams(float(rng.choice([1.5, 2.0, 3.0])))
        g = random_step_function(rng, int(rng.integers(1, 40)))
        phi = phi_functional(g, params, method=config.method)
        phi_scaled = phi_functional(g.scaled(lam), params, method=config.method)
        worst_scaling = max(worst_scaling, abs(phi_scaled - lam ** params.p * phi) / phi_scaled)

        F = p_moment(g, params)
        dominated &= phi >= F * (1.0 - tol.scaling)
        bound = bellman_value(params, MomentPair(integral(g), F))
        bounded &= phi <= bound * (1.0 + tol.attainment)

        shuffled = rng.permutation(g.n)
        r = decreasing_rearrangement(g.values[shuffled], g.widths[shuffled])
        worst_moments = max(worst_moments,
                            abs(integral(r) - integral(g)) / integral(g),
                            abs(p_moment(r, params) - F) / F)

    log.check("phi_scaling", worst_scaling <= tol.scaling, worst_scaling, tol.scaling)
    log.check("hardy_domination", dominated, float(dominated), 1.0)
    log.check("bellman_upper_bound", bounded, float(bounded), 1.0)
    log.check("rearrangement_moments", worst_moments <= tol.moment_exactness, worst_moments,
              tol.moment_exactness)

    leaf = random_leaf_function(6, rng)
    maximal = maximal_operator(DyadicTree(6), leaf)
    dominance = bool(np.all(maximal.values >= leaf.values)
                     and np.all(maximal.values >= leaf.values.mean() * (1.0 - 1e-15)))
    log.check("maximal_dominance", dominance, float(dominance), 1.0)

    err = max(gradient_check(random_step_function(rng, 12, min_gap=0.01),
                             PParams(GRADIENT_EXPONENTS[i % len(GRADIENT_EXPONENTS)]))
              for i in range(GRADIENT_INSTANCES))
    log.check("gradient_finite_difference", err <= tol.finite_difference, err, tol.finite_difference)


def suite_determinism(log: CheckLog, config: ExperimentConfig, settings: LabSettings):
    small = config.model_copy(update={"cells": DETERMINISM_CELLS, "samples": min(config.samples, 20)})
    for command in (cmd_bellman, cmd_extremal, cmd_simulate):
        first = scalar_results(command(small, settings))
        second = scalar_results(command(small, settings))
        same = first == second
        log.check(f"determinism_{command.__name__[4:]}", same, float(same), 1.0,
                  "bit-exact" if same else "results differ between runs")


SUITES: Dict[str, Callable[[CheckLog, ExperimentConfig, LabSettings], None]] = {
    "bellman": suite_bellman,
    "extremal": suite_extremal,
    "sequences": suite_sequences,
    "optimizer": suite_optimizer,
    "dyadic": suite_dyadic,
    "invariants": suite_invariants,
    "determinism": suite_determinism,
}


def selected_suites(only: Optional[List[str]]) -> List[str]:
    if not only:
        return list(SUITES)
    unknown = [name for name in only if name not in SUITES]
    if unknown:
        raise DomainError(f"unknown suite(s): {', '.join(unknown)} (choose from {', '.join(SUITES)})")
    return [name for name in SUITES if name in only]


def run_acceptance(config: ExperimentConfig, settings: LabSettings) -> RunReport:
    """Run the selected suites; report.passed is False when any check failed."""
    start = time.time()
    report = new_report("verify", config)
    log = CheckLog()
    names = selected_suites(config.only)
    report.inputs["suites"] = names

    for name in names:
        logger.info(f"Running suite: {name}")
        suite_start = time.time()
        SUITES[name](log, config, settings)
        logger.info(f"Suite {name} finished in {time.time() - suite_start:.1f}s")

    report.results = log.results
    report.passed = not log.failed
    report.wall_time = time.time() - start
    return report


def cmd_verify(config: ExperimentConfig, settings: Optional[LabSettings] = None) -> RunReport:
    """Full acceptance suite, or the suites named in config.only."""
    return run_acceptance(config, settings or LabSettings())


def require_pass(report: RunReport):
    """Raise AcceptanceFailure listing the failed checks of a verify report."""
    failed = [name for name, r in report.results.items()
              if isinstance(r, dict) and r.get("passed") is False]
    if failed:
        raise AcceptanceFailure(failed)
