"""
Experiment Commands
One function per CLI subcommand. Each builds its inputs from an ExperimentConfig, runs the
numerics and returns a RunReport; writing and printing are left to the caller.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .bellman_core import bellman_ceiling, bellman_value, check_feasible, lp_constant, omega_p
from .config import ExperimentConfig, LabSettings
from .dyadic_sim import (
    AlphaTree,
    DyadicTree,
    LeafFunction,
    MAX_NODES_PER_RANK,
    average_identity_check,
    build_phi_a,
    sandwich_sweep,
    symmetrization_check,
    symmetrization_sweep,
)
from .extremal import (
    auto_t_min,
    build_g0,
    discretize_g0,
    eigen_identity_check,
    sequence_series,
    tail_table,
    tail_violations,
)
from .models import (
    AscentConfig,
    AscentTrace,
    ExtremalSequenceSpec,
    MomentPair,
    PParams,
    RunReport,
)
from .monotone_fn import StepFunction, defect, lp_distance, phi_functional, to_frame
from .optimizer import comovement, maximize, trace_violations

logger = logging.getLogger(__name__)

EXTREMAL_CELLS = 2 ** 16
OPTIMIZE_CELLS = 2 ** 12
SIMULATE_CELLS = 2 ** 14
SYMMETRIZATION_DEPTH = 8

SEQUENCE_SCHEDULE = [2 ** k for k in range(4, 15)]
TAIL_DELTAS = [1e-2, 1e-4, 1e-6]
TAIL_SCHEDULE = [16, 256, 4096]
EIGEN_SAMPLES = 100


def _problem(config: ExperimentConfig) -> Tuple[PParams, MomentPair]:
    return PParams(config.p), MomentPair(config.f, config.F)


def new_report(command: str, config: ExperimentConfig) -> RunReport:
    return RunReport(
        command=command,
        inputs=config.echo(),
        tolerances=config.tolerances.model_dump(),
        version=__version__,
    )


def cmd_bellman(config: ExperimentConfig, settings: Optional[LabSettings] = None) -> RunReport:
    """c = omega_p(f^p/F) and B_p(f, F)."""
    start = time.time()
    params, moments = _problem(config)
    report = new_report("bellman", config)

    x = check_feasible(params, moments)
    omega = omega_p(params, x)
    report.results = {
        "x": x,
        "c": omega.c,
        "residual": omega.residual,
        "bellman": bellman_value(params, moments),
        "lp_constant": lp_constant(params),
        "ceiling": bellman_ceiling(params, moments),
        "trivial": x == 1.0,
    }
    logger.info(f"p={params.p}, f={moments.f}, F={moments.F}: c={omega.c!r}, "
                f"B={report.results['bellman']!r}")
    report.wall_time = time.time() - start
    return report


def cmd_extremal(config: ExperimentConfig, settings: Optional[LabSettings] = None) -> RunReport:
    """g0, its discretization, Phi_p and the defect; plus the three near-extremal families."""
    start = time.time()
    settings = settings or LabSettings()
    params, moments = _problem(config)
    cells = config.cells or EXTREMAL_CELLS
    report = new_report("extremal", config)
    report.inputs["cells"] = cells

    g0 = build_g0(params, moments)
    bellman = bellman_value(params, moments)
    g = discretize_g0(g0, cells, moments, params)
    phi = phi_functional(g, params, method=config.method)

    samples = np.geomspace(1e-6, 1.0, EIGEN_SAMPLES)
    eigen = max(eigen_identity_check(g0, g0.c, float(t)) / (g0.c * float(g0(t)))
                for t in samples)

    report.results = {
        "k": g0.k,
        "e": g0.e,
        "c": g0.c,
        "t_min": auto_t_min(g0, params),
        "bellman": bellman,
        "phi": phi,
        "relative_gap": (bellman - phi) / bellman,
        "defect": defect(g, g0.c, params, method=config.method).value,
        "eigen_identity": eigen,
    }
    report.series["g0"] = to_frame(g)

    for kind in ExtremalSequenceSpec.KINDS:
        series = sequence_series(params, moments, kind, SEQUENCE_SCHEDULE, cells=cells,
                                 cutoff=config.cutoff, method=config.method,
                                 workers=settings.WORKERS)
        report.series[kind] = series

    tail = tail_table(params, moments, TAIL_SCHEDULE, TAIL_DELTAS, cells=cells,
                      cutoff=config.cutoff)
    report.series["tail"] = tail
    report.results["tail_violations"] = len(tail_violations(tail))

    report.wall_time = time.time() - start
    return report


def _ascent(config: ExperimentConfig, params: PParams, moments: MomentPair, seed: int,
            cells: int) -> Tuple[StepFunction, AscentTrace]:
    ascent = AscentConfig(cells=cells, max_iters=config.max_iters, step_size=config.step_size,
                          tol_obj=config.tol_obj, seed=seed)
    return maximize(ascent, params, moments, method=config.method)


def cmd_optimize(config: ExperimentConfig, settings: Optional[LabSettings] = None) -> RunReport:
    """Projected-gradient ascent from `runs` consecutive seeds."""
    start = time.time()
    settings = settings or LabSettings()
    params, moments = _problem(config)
    cells = config.cells or OPTIMIZE_CELLS
    AscentConfig(cells=cells)  # rejects too-small grids before the fan-out
    report = new_report("optimize", config)
    report.inputs["cells"] = cells

    bellman = bellman_value(params, moments)
    g0 = build_g0(params, moments)
    reference = discretize_g0(g0, cells, moments, params)
    seeds = [config.seed + i for i in range(config.runs)]

    with ThreadPoolExecutor(max_workers=settings.WORKERS) as executor:
        futures = [executor.submit(_ascent, config, params, moments, s, cells) for s in seeds]
        outcomes = [future.result() for future in futures]

    runs: List[Dict[str, Any]] = []
    best_index = 0
    for i, (seed, (final, trace)) in enumerate(zip(seeds, outcomes)):
        objective = phi_functional(final, params, method=config.method)
        runs.append({
            "seed": seed,
            "objective": objective,
            "ratio": objective / bellman,
            "lp_dist": lp_distance(final, reference, params),
            "converged": trace.converged,
            "iterations": len(trace.records) - 1,
            "comovement": comovement(trace),
            "violations": trace_violations(trace, config.tolerances.bellman_ceiling),
        })
        report.series[f"trace_seed{seed}"] = trace.to_frame()
        if objective > runs[best_index]["objective"]:
            best_index = i

    report.results = {
        "bellman": bellman,
        "best_seed": runs[best_index]["seed"],
        "best_ratio": runs[best_index]["ratio"],
        "worst_ratio": min(r["ratio"] for r in runs),
        "max_lp_dist": max(r["lp_dist"] for r in runs),
        "runs": runs,
    }
    report.series["final"] = to_frame(outcomes[best_index][0])
    report.wall_time = time.time() - start
    return report


def hand_instance(params: PParams) -> Tuple[float, float]:
    """Symmetrization sides for the 4-leaf function (4, 0, 0, 0)."""
    return symmetrization_check(DyadicTree(2), LeafFunction([4.0, 0.0, 0.0, 0.0]), params)


def alpha_depth(config: ExperimentConfig) -> Optional[int]:
    """Explicit alpha-tree depth in branching mode; automatic in chain mode."""
    if config.branching == 1:
        return None
    if config.depth is not None:
        return config.depth
    depth = 0
    while config.branching ** (depth + 2) <= MAX_NODES_PER_RANK:
        depth += 1
    return depth


def cmd_simulate(config: ExperimentConfig, settings: Optional[LabSettings] = None) -> RunReport:
    """Sandwich sweep over the a schedule and the symmetrization property sweep."""
    start = time.time()
    settings = settings or LabSettings()
    params, moments = _problem(config)
    cells = config.cells or SIMULATE_CELLS
    report = new_report("simulate", config)
    report.inputs["cells"] = cells

    g0 = build_g0(params, moments)
    g = discretize_g0(g0, cells, moments, params)
    schedule = config.schedule()
    depth = alpha_depth(config)

    sweep = sandwich_sweep(g, params, schedule, gamma=config.gamma, branching=config.branching,
                           depth=depth, method=config.method, workers=settings.WORKERS)
    report.series["sandwich"] = sweep

    identity = []
    for a in schedule:
        alpha = AlphaTree.build(a, branching=config.branching, depth=depth)
        phi_a = build_phi_a(alpha, g)
        worst = max(average_identity_check(alpha, phi_a, g, m) for m in range(alpha.depth + 2))
        identity.append({"a": a, "depth": alpha.depth, "max_identity_error": worst,
                         "uncovered_mass": phi_a.uncovered_mass,
                         "truncated": int(phi_a.truncated)})
    report.series["average_identity"] = pd.DataFrame(
        identity, columns=["a", "depth", "max_identity_error", "uncovered_mass", "truncated"])

    sym_depth = config.depth if config.branching == 1 and config.depth else SYMMETRIZATION_DEPTH
    sym = symmetrization_sweep(sym_depth, config.samples, params, seed=config.seed,
                               method=config.method)
    report.series["symmetrization"] = sym

    lhs, rhs = hand_instance(params)
    tol = config.tolerances.symmetrization
    report.results = {
        "hand_lhs": lhs,
        "hand_rhs": rhs,
        "symmetrization_violations": int(np.sum(sym["lhs"] > sym["rhs"] + tol)),
        "lp_bound_violations": int(np.sum(sym["maximal_norm"] > sym["lp_bound"] * (1.0 + tol))),
        "final_relative_gap": float(sweep["relative_gap"].iloc[-1]),
        "max_identity_error": max(row["max_identity_error"] for row in identity),
    }
    report.wall_time = time.time() - start
    return report
