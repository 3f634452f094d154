"""
Extremal Functions
The power law g0(t) = k t^(-1 + 1/c) with c = omega_p(f^p/F), k = f/c, its discretization
on geometric grids, and three families of feasible step functions approaching it.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from .bellman_core import bellman_value, check_feasible, is_trivial, omega_p
from .models import DomainError, ExtremalSequenceSpec, MomentPair, PowerLawFunction, PParams
from .monotone_fn import (
    StepFunction,
    defect,
    geometric_grid,
    lp_distance,
    phi_functional,
    renormalize_moments,
    tail_mass,
)

logger = logging.getLogger(__name__)

DEFAULT_T_MIN = 1e-8
T_MIN_FLOOR = 1e-300

# Fraction of the p-mass of g0 allowed below the first breakpoint of an automatic grid
TAIL_TOL = 1e-8

# Allowed excess of a family member's tail p-mass over the tail of g0
TAIL_SLACK = 1.1


def build_g0(params: PParams, moments: MomentPair) -> PowerLawFunction:
    """
    The unique extremal function for (p, f, F).

    c = omega_p(f^p/F), k = f/c, e = -1 + 1/c. In the trivial case f^p = F this is the
    constant f (k = f, e = 0, c = 1).
    """
    x = check_feasible(params, moments)
    if x == 1.0:
        return PowerLawFunction(k=moments.f, e=0.0, c=1.0)
    c = omega_p(params, x).c
    g0 = PowerLawFunction(k=moments.f / c, e=-1.0 + 1.0 / c, c=c)
    logger.debug(f"g0 for p={params.p}, f={moments.f}, F={moments.F}: k={g0.k}, e={g0.e}")
    return g0


def eigen_identity_check(g0: PowerLawFunction, c: float, t: float) -> float:
    """|(1/t) * integral of g0 over (0, t] - c * g0(t)|, evaluated in closed form."""
    if not 0.0 < t <= 1.0:
        raise DomainError("t must lie in (0, 1]")
    e = g0.e
    average = g0.k * t ** (e + 1.0) / (e + 1.0) / t
    return abs(average - c * g0.k * t ** e)


def auto_t_min(g0: PowerLawFunction, params: PParams, tail_tol: float = TAIL_TOL) -> float:
    """
    First breakpoint of a geometric grid for g0.

    g0 carries the p-mass fraction delta^(1 + p*e) below delta; the grid starts where that
    fraction equals tail_tol, or at DEFAULT_T_MIN if that is smaller.
    """
    if g0.is_constant:
        return DEFAULT_T_MIN
    q = 1.0 + params.p * g0.e
    t_min = tail_tol ** (1.0 / q) if q > 0 else T_MIN_FLOOR
    return float(min(DEFAULT_T_MIN, max(t_min, T_MIN_FLOOR)))


def reference_grid(g0: PowerLawFunction, params: PParams, cells: int,
                   t_min: Optional[float] = None) -> np.ndarray:
    return geometric_grid(cells, auto_t_min(g0, params) if t_min is None else t_min)


def mollification_t_min(g0: PowerLawFunction, params: PParams, n: int) -> float:
    """
    First breakpoint of the n-cell mollification grid.

    g0 leaves the p-mass fraction n^(-3/2) left of it; never below auto_t_min and never
    above DEFAULT_T_MIN. Keeps the cell ratio of short grids moderate.
    """
    floor = auto_t_min(g0, params)
    q = 1.0 + params.p * g0.e
    if g0.is_constant or q <= 0.0:
        return floor
    return float(min(DEFAULT_T_MIN, max(float(n) ** (-1.5 / q), floor)))


def _monotone(values: np.ndarray) -> np.ndarray:
    # Guards the last-ulp wobble of closed-form cell averages
    return np.minimum.accumulate(values)


def discretize_g0(g0: PowerLawFunction, cells: int, moments: MomentPair, params: PParams,
                  t_min: Optional[float] = None) -> StepFunction:
    """
    Cell averages of g0 on a geometric grid, renormalized to the exact moments (f, F).

    Args:
        g0: The extremal function
        cells: Number of cells (>= 2)
        moments: Target moments
        params: The exponent
        t_min: First breakpoint; chosen from the tail of g0 when omitted
    """
    if cells < 2:
        raise DomainError(f"discretization needs at least 2 cells (got {cells})")
    grid = reference_grid(g0, params, cells, t_min)
    if g0.is_constant:
        return StepFunction.constant(moments.f, grid)
    values = _monotone(g0.cell_averages(grid))
    return renormalize_moments(StepFunction(grid, values), moments, params)


def truncation_height(g0: PowerLawFunction, params: PParams, n: int, cutoff: str = "mass") -> float:
    """
    Height h_n at which the n-th truncation clips g0.

    "mass": clip where the part of g0 left of the cut carries p-mass fraction 1/n.
    "time": clip at g0(1/n).
    """
    if cutoff == "time":
        return float(g0(1.0 / n))
    tau = float(n) ** (-1.0 / (1.0 + params.p * g0.e))
    return float(g0(tau))


def make_sequence(spec: ExtremalSequenceSpec) -> StepFunction:
    """
    Member g_n of a near-extremal family, with exact moments (f, F).

    truncation: cell averages of min(g0, h_n), renormalized
    mollification: cell averages of g0 on an n-cell geometric grid from
        mollification_t_min, renormalized
    perturbation: cell averages of g0 + (k/n)(1 - 2t), renormalized
    """
    params, moments = spec.params, spec.moments
    g0 = build_g0(params, moments)

    if is_trivial(params, moments):
        cells = spec.n if spec.kind == "mollification" else spec.cells
        return StepFunction.constant(moments.f, reference_grid(g0, params, max(cells, 1)))

    if spec.kind == "mollification":
        grid = reference_grid(g0, params, spec.n, mollification_t_min(g0, params, spec.n))
        values = g0.cell_averages(grid)
    elif spec.kind == "truncation":
        grid = reference_grid(g0, params, spec.cells)
        height = truncation_height(g0, params, spec.n, spec.cutoff)
        values = g0.truncated_cell_averages(grid, height)
    else:
        grid = reference_grid(g0, params, spec.cells)
        bump = 1.0 - (grid[:-1] + grid[1:])     # cell averages of 1 - 2t
        values = g0.cell_averages(grid) + (g0.k / spec.n) * bump

    shape = StepFunction(grid, _monotone(np.maximum(values, 0.0)))
    return renormalize_moments(shape, moments, params)


def rank_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman correlation of two series (nan for fewer than 3 points)."""
    if len(x) < 3:
        return float("nan")
    return float(spearmanr(x, y).statistic)


def sequence_series(params: PParams, moments: MomentPair, kind: str, schedule: Iterable[int],
                    cells: int = 2 ** 16, cutoff: str = "mass", method: str = "auto",
                    workers: int = 4) -> pd.DataFrame:
    """
    Evaluate a family along a schedule of indices.

    Returns:
        DataFrame with columns n, phi, gap, defect, lp_dist in schedule order
    """
    g0 = build_g0(params, moments)
    bellman = bellman_value(params, moments)
    reference = discretize_g0(g0, cells, moments, params)
    schedule = list(schedule)

    def evaluate(n: int) -> Dict[str, float]:
        member = make_sequence(ExtremalSequenceSpec(kind, n, params, moments, cells, cutoff))
        phi = phi_functional(member, params, method=method)
        return {
            "n": n,
            "phi": phi,
            "gap": bellman - phi,
            "defect": defect(member, g0.c, params, method=method).value,
            "lp_dist": lp_distance(member, reference, params),
        }

    rows: Dict[int, Dict[str, float]] = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(evaluate, n): n for n in schedule}
        for future in as_completed(futures):
            n = futures[future]
            rows[n] = future.result()
            logger.info(f"{kind} n={n}: gap={rows[n]['gap']:.3e}, defect={rows[n]['defect']:.3e}")

    return pd.DataFrame([rows[n] for n in schedule],
                        columns=["n", "phi", "gap", "defect", "lp_dist"])


def tail_profile(members: List[StepFunction], params: PParams,
                 deltas: Sequence[float]) -> List[float]:
    """Supremum over the members of the p-mass on (0, delta], for each delta."""
    return [max(tail_mass(g, params, d) for g in members) for d in deltas]


def power_law_tail(g0: PowerLawFunction, params: PParams, delta: float) -> float:
    """Closed-form p-mass of g0 on (0, delta]; the profile tail_profile is measured against."""
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1] (got {delta})")
    return g0.tail_p_mass(params, delta)


def tail_table(params: PParams, moments: MomentPair, schedule: Iterable[int],
               deltas: Sequence[float], cells: int = 2 ** 16, cutoff: str = "mass") -> pd.DataFrame:
    """
    Sup of the tail p-mass over every member of every family, per delta.

    Returns:
        DataFrame with columns delta, sup_tail, g0_tail, bound (TAIL_SLACK * g0_tail)
    """
    g0 = build_g0(params, moments)
    members = [make_sequence(ExtremalSequenceSpec(kind, n, params, moments, cells, cutoff))
               for kind in ExtremalSequenceSpec.KINDS for n in schedule]
    reference = [power_law_tail(g0, params, d) for d in deltas]
    return pd.DataFrame({
        "delta": list(deltas),
        "sup_tail": tail_profile(members, params, deltas),
        "g0_tail": reference,
        "bound": [TAIL_SLACK * r for r in reference],
    }, columns=["delta", "sup_tail", "g0_tail", "bound"])


def tail_violations(table: pd.DataFrame) -> List[str]:
    """Rows where the sup tail exceeds its bound or fails to fall as delta shrinks."""
    problems = []
    sup = list(table["sup_tail"])
    for i, row in enumerate(table.itertuples(index=False)):
        if row.sup_tail > row.bound:
            problems.append(f"delta={row.delta:g}: sup tail {row.sup_tail:.6g} > {row.bound:.6g}")
        if i > 0 and not sup[i] < sup[i - 1]:
            problems.append(f"delta={row.delta:g}: sup tail did not decrease")
    return problems
