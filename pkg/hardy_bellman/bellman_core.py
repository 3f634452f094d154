"""
Bellman Core
Scalar machinery of the extremal problem: H_p, its inverse omega_p on [1, p/(p-1)],
the Bellman value B_p(f, F) = F * omega_p(f^p / F)^p and the feasibility rule f^p <= F.
"""

import logging

import numpy as np
from scipy.optimize import bisect

from .models import DomainError, MomentPair, OmegaValue, PParams

logger = logging.getLogger(__name__)

# Bisection stops at this bracket width; Newton polishes the rest
BRACKET_XTOL = 1e-14
NEWTON_STEPS = 4

# Relative slack allowed on f^p <= F before a pair is declared infeasible
FEASIBILITY_SLACK = 1e-12


def lp_constant(params: PParams) -> float:
    """The L^p constant p/(p-1)."""
    return params.conjugate


def hp_eval(params: PParams, z: float) -> float:
    """
    Evaluate H_p(z) = -(p-1) z^p + p z^(p-1) on the bracket [1, p/(p-1)].

    Raises:
        DomainError: z outside the bracket
    """
    p = params.p
    if not 1.0 <= z <= params.conjugate:
        raise DomainError(f"z={z} outside the bracket [1, {params.conjugate}]")
    return _hp(p, z)


def hp_derivative(params: PParams, z: float) -> float:
    """H_p'(z) = p(p-1) z^(p-2) (1 - z); negative inside the bracket."""
    p = params.p
    return p * (p - 1.0) * z ** (p - 2.0) * (1.0 - z)


def _hp(p: float, z: float) -> float:
    return -(p - 1.0) * z ** p + p * z ** (p - 1.0)


def omega_p(params: PParams, x: float) -> OmegaValue:
    """
    Invert H_p on [1, p/(p-1)].

    Bisection narrows the bracket to BRACKET_XTOL, then a few Newton steps polish the
    root; a Newton step is kept only if it stays in the bracket and lowers the residual.

    Args:
        params: The exponent
        x: Ratio f^p / F in (0, 1]

    Returns:
        OmegaValue with c in [1, p/(p-1)] and H_p(c) = x
    """
    x = float(x)
    if not (0.0 < x <= 1.0) or not np.isfinite(x):
        raise DomainError(f"omega_p needs 0 < x <= 1 (got x={x})")
    if x == 1.0:
        return OmegaValue(c=1.0, x=1.0, residual=0.0)

    p, top = params.p, params.conjugate
    c = bisect(lambda z: _hp(p, z) - x, 1.0, top, xtol=BRACKET_XTOL)
    residual = abs(_hp(p, c) - x)

    for _ in range(NEWTON_STEPS):
        slope = hp_derivative(params, c)
        if slope == 0.0:
            break
        trial = c - (_hp(p, c) - x) / slope
        if not 1.0 <= trial <= top:
            break
        trial_residual = abs(_hp(p, trial) - x)
        if trial_residual >= residual:
            break
        c, residual = trial, trial_residual

    logger.debug(f"omega_p(p={p}, x={x}) = {c} (residual {residual:.3e})")
    return OmegaValue(c=float(c), x=x, residual=float(residual))


def check_feasible(params: PParams, moments: MomentPair) -> float:
    """
    Validate 0 < f^p <= F and return x = f^p / F (clamped to 1 inside the slack).

    Raises:
        DomainError: "infeasible: f^p > F"
    """
    x = moments.ratio(params)
    if x > 1.0 + FEASIBILITY_SLACK:
        raise DomainError(
            f"infeasible: f^p > F (f={moments.f}, F={moments.F}, p={params.p})"
        )
    return min(x, 1.0)


def is_trivial(params: PParams, moments: MomentPair) -> bool:
    """f^p = F: only the constant function f is admissible."""
    return check_feasible(params, moments) == 1.0


def bellman_value(params: PParams, moments: MomentPair) -> float:
    """B_p(f, F) = F * omega_p(f^p / F)^p; equals F in the trivial case."""
    x = check_feasible(params, moments)
    if x == 1.0:
        return moments.F
    c = omega_p(params, x).c
    return moments.F * c ** params.p


def bellman_ceiling(params: PParams, moments: MomentPair) -> float:
    """F * (p/(p-1))^p, the limit of B_p as f^p / F -> 0."""
    check_feasible(params, moments)
    return moments.F * params.conjugate ** params.p
