"""
Cell Quadrature
Integrals of (v + a/t)^q and (v + a/t)^q / t over the cells of a step function.

Integer exponents use the binomial closed form; other exponents use an adaptive Simpson
rule that refines every cell of a partition at once.
"""

import logging
from typing import Callable

import numpy as np
from scipy.special import binom

from .models import DomainError

logger = logging.getLogger(__name__)

# Adaptive Simpson settings
REL_TOL = 1e-10
ABS_TOL = 1e-14
MAX_DEPTH = 50

# Below this log-ratio the t^(1-m) antiderivative differences go through expm1
SMALL_LOG_RATIO = 0.5

# Alternating binomial sums (v < 0) lose relative precision above this power
SIGNED_EXACT_MAX_POWER = 4

METHODS = ("auto", "exact", "quad")


def use_exact(power: float, method: str) -> bool:
    """Decide between the binomial closed form and adaptive quadrature."""
    if method not in METHODS:
        raise DomainError(f"unknown integration method: {method}")
    integral_power = float(power).is_integer() and power >= 0
    if method == "exact":
        if not integral_power:
            raise DomainError(f"exact integration needs an integer exponent (got {power})")
        return True
    if method == "quad":
        return False
    return integral_power


def adaptive_simpson(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    rel_tol: float = REL_TOL,
    abs_tol: float = ABS_TOL,
    max_depth: int = MAX_DEPTH,
) -> np.ndarray:
    """
    Adaptive Simpson integration over many intervals at once.

    Args:
        func: Integrand func(t, owner) where owner indexes the interval each t belongs to
        lo: Left endpoints
        hi: Right endpoints
        rel_tol: Relative target per interval
        abs_tol: Absolute floor per interval
        max_depth: Bisection depth cap

    Returns:
        Array of integrals, one per interval
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    total = np.zeros(len(lo))
    if len(lo) == 0:
        return total

    owner = np.arange(len(lo))
    a, b = lo, hi
    m = 0.5 * (a + b)
    fa, fm, fb = func(a, owner), func(m, owner), func(b, owner)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = np.maximum(abs_tol, rel_tol * np.abs(whole))
    depth = 0

    while len(a):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = func(lm, owner), func(rm, owner)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        done = (np.abs(delta) <= 15.0 * tol) | (depth >= max_depth)
        if depth >= max_depth and not np.all(np.abs(delta[done]) <= 15.0 * tol[done]):
            logger.warning("Adaptive Simpson hit the depth cap; accepting unconverged cells")
        np.add.at(total, owner[done], left[done] + right[done] + delta[done] / 15.0)

        keep = ~done
        if not np.any(keep):
            break
        # Each unresolved interval splits into its two halves
        a = np.concatenate([a[keep], m[keep]])
        b = np.concatenate([m[keep], b[keep]])
        fa_next = np.concatenate([fa[keep], fm[keep]])
        fb_next = np.concatenate([fm[keep], fb[keep]])
        fm = np.concatenate([flm[keep], frm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        tol = np.concatenate([tol[keep], tol[keep]]) / 2.0
        owner = np.concatenate([owner[keep], owner[keep]])
        fa, fb = fa_next, fb_next
        m = 0.5 * (a + b)
        depth += 1

    return total


def _inverse_power_integrals(lo: np.ndarray, hi: np.ndarray, top: int) -> np.ndarray:
    """
    Scaled integrals of t^(-m) over [lo, hi] for m = 0..top.

    Row m holds lo^(m-1) times the integral, so that row m multiplied by lo * (a/lo)^m
    gives a^m times the integral without forming lo^(1-m).
    """
    log_ratio = np.log1p((hi - lo) / lo)
    rows = np.empty((top + 1, len(lo)))
    rows[0] = (hi - lo) / lo
    if top >= 1:
        rows[1] = log_ratio
    small = log_ratio < SMALL_LOG_RATIO
    ratio = lo / hi
    for m in range(2, top + 1):
        via_expm1 = -np.expm1(-(m - 1) * log_ratio)
        direct = 1.0 - ratio ** (m - 1)
        rows[m] = np.where(small, via_expm1, direct) / (m - 1)
    return rows


def binomial_cell_integrals(v: np.ndarray, a: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                            power: int, shift: int = 0) -> np.ndarray:
    """
    Closed form of the integral of (v + a/t)^power / t^shift over [lo, hi], lo > 0.

    v may be negative (the defect integrand); the sum is then the signed integral.
    """
    u = a / lo
    rows = _inverse_power_integrals(lo, hi, power + shift)
    acc = np.zeros(len(lo))
    for k in range(power + 1):
        acc = acc + binom(power, k) * v ** (power - k) * u ** k * rows[k + shift]
    return acc * lo if shift == 0 else acc


def _quadrature_cell_integrals(v: np.ndarray, a: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                               power: float, shift: int, absolute: bool) -> np.ndarray:
    def integrand(t: np.ndarray, owner: np.ndarray) -> np.ndarray:
        base = v[owner] + a[owner] / t
        if absolute:
            base = np.abs(base)
        else:
            base = np.maximum(base, 0.0)
        out = base ** power
        return out / t if shift else out

    return adaptive_simpson(integrand, lo, hi)


def cell_integrals(v: np.ndarray, a: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                   power: float, shift: int = 0, method: str = "auto",
                   absolute: bool = False) -> np.ndarray:
    """
    Integral of |v + a/t|^power / t^shift over each [lo, hi] with lo > 0.

    The sign of v + a/t must be constant on each piece when absolute is set; callers split
    cells at the zero crossing first. Under "auto", absolute pieces with v < 0 and power
    above SIGNED_EXACT_MAX_POWER go through quadrature.
    """
    v, a = np.asarray(v, dtype=float), np.asarray(a, dtype=float)
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if len(lo) == 0:
        return np.zeros(0)

    if not use_exact(power, method):
        return _quadrature_cell_integrals(v, a, lo, hi, power, shift, absolute)

    out = binomial_cell_integrals(v, a, lo, hi, int(power), shift)
    if not absolute:
        return out
    # Sign of the integrand at the piece midpoint fixes the sign of the whole piece
    mid = v + a / (0.5 * (lo + hi))
    out = out * np.where(mid < 0, -1.0, 1.0) ** int(power)

    if method == "auto" and power > SIGNED_EXACT_MAX_POWER:
        cancelling = v < 0.0
        if np.any(cancelling):
            out[cancelling] = _quadrature_cell_integrals(
                v[cancelling], a[cancelling], lo[cancelling], hi[cancelling], power, shift, True)
    return out
