"""
Monotone Step Functions
Non-increasing nonnegative step functions on (0, 1] and the quantities evaluated on them:
moments, the Hardy average, the functional Phi_p, the eigen-defect and L^p distances.

On cell i = (t_{i-1}, t_i] the Hardy average is v_i + a_i/t with
a_i = C_{i-1} - v_i t_{i-1} >= 0, so every integrand is smooth cell by cell and the
first cell (a_1 = 0) is constant.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from .bellman_core import check_feasible
from .models import DefectValue, DomainError, InfeasibleProjectionError, MomentPair, PParams
from .quadrature import cell_integrals

logger = logging.getLogger(__name__)

# Moments within this relative distance of the target are left untouched
MOMENT_MATCH_TOL = 1e-12
LENGTH_SUM_TOL = 1e-12


@dataclass(frozen=True)
class CumulativeProfile:
    """Prefix masses C_i of a step function at its breakpoints."""
    breakpoints: np.ndarray
    masses: np.ndarray              # C_0 = 0, ..., C_n = integral
    values: np.ndarray

    def at(self, t):
        """C(t), the integral of g over (0, t]."""
        t = np.asarray(t, dtype=float)
        idx = _cell_index(self.breakpoints, t)
        return self.masses[idx] + self.values[idx] * (t - self.breakpoints[idx])


@dataclass(frozen=True)
class StepFunction:
    """
    Non-increasing nonnegative step function on (0, 1].

    Value values[i] holds on (breakpoints[i], breakpoints[i+1]].
    """
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.breakpoints, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or v.ndim != 1 or len(v) < 1 or len(t) != len(v) + 1:
            raise DomainError("step function needs n >= 1 values and n + 1 breakpoints")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise DomainError("breakpoints must start at 0 and end at 1")
        if not np.all(np.diff(t) > 0.0):
            raise DomainError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise DomainError("values must be finite and nonnegative")
        if np.any(np.diff(v) > 0.0):
            raise DomainError("values must be non-increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float, breakpoints: Optional[np.ndarray] = None) -> "StepFunction":
        t = np.array([0.0, 1.0]) if breakpoints is None else np.asarray(breakpoints, dtype=float)
        return cls(t, np.full(len(t) - 1, float(value)))

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def profile(self) -> CumulativeProfile:
        masses = np.concatenate([[0.0], np.cumsum(self.values * self.widths)])
        return CumulativeProfile(self.breakpoints, masses, self.values)

    @property
    def hardy_offsets(self) -> np.ndarray:
        """a_i per cell, accumulated as sums of nonnegative jumps times breakpoints."""
        jumps = (self.values[:-1] - self.values[1:]) * self.breakpoints[1:-1]
        return np.concatenate([[0.0], np.cumsum(jumps)])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.values[_cell_index(self.breakpoints, t)]

    def scaled(self, factor: float) -> "StepFunction":
        return StepFunction(self.breakpoints, self.values * factor)


def _cell_index(breakpoints: np.ndarray, t) -> np.ndarray:
    """Zero-based cell index of t in (0, 1]: cell i is (t_i, t_{i+1}]."""
    idx = np.searchsorted(breakpoints, t, side="left") - 1
    return np.clip(idx, 0, len(breakpoints) - 2)


def _check_time(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0) or np.any(t > 1.0):
        raise DomainError("t must lie in (0, 1]")
    return t


def geometric_grid(cells: int, t_min: float = 1e-8) -> np.ndarray:
    """Breakpoints 0, t_1, ..., t_n = 1 with constant ratio t_{i+1}/t_i."""
    if cells < 1:
        raise DomainError(f"need at least one cell (got {cells})")
    if not 0.0 < t_min < 1.0:
        raise DomainError(f"t_min must lie in (0, 1) (got {t_min})")
    if cells == 1:
        return np.array([0.0, 1.0])
    inner = np.geomspace(t_min, 1.0, cells)
    inner[0], inner[-1] = t_min, 1.0
    return np.concatenate([[0.0], inner])


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def integral(g: StepFunction) -> float:
    return float(np.sum(g.values * g.widths))


def p_moment(g: StepFunction, params: PParams) -> float:
    return float(np.sum(g.values ** params.p * g.widths))


def cumulative(g: StepFunction, t):
    """The integral of g over (0, t]."""
    t = _check_time(t)
    out = g.profile.at(t)
    return float(out) if out.ndim == 0 else out


def tail_mass(g: StepFunction, params: PParams, delta: float) -> float:
    """Integral of g^p over (0, delta]."""
    if not 0.0 < delta <= 1.0:
        raise DomainError("delta must lie in (0, 1]")
    lo = g.breakpoints[:-1]
    hi = np.minimum(g.breakpoints[1:], delta)
    inside = hi > lo
    return float(np.sum(g.values[inside] ** params.p * (hi[inside] - lo[inside])))


def hardy_at(g: StepFunction, t):
    """The Hardy average C(t)/t = v_i + a_i/t on the cell holding t."""
    t = _check_time(t)
    idx = _cell_index(g.breakpoints, t)
    out = g.values[idx] + g.hardy_offsets[idx] / t
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Integrals of the Hardy average
# ---------------------------------------------------------------------------

def _pieces(g: StepFunction, lo: float, hi: float):
    """Cells of g clipped to [lo, hi]: (cell index, piece start, piece end)."""
    t = g.breakpoints
    first = int(_cell_index(t, np.nextafter(lo, 2.0))) if lo > 0.0 else 0
    last = int(_cell_index(t, hi))
    idx = np.arange(first, last + 1)
    start = np.maximum(t[idx], lo)
    end = np.minimum(t[idx + 1], hi)
    keep = end > start
    return idx[keep], start[keep], end[keep]


def hardy_power_integral(g: StepFunction, params: PParams, lo: float = 0.0, hi: float = 1.0,
                         method: str = "auto") -> float:
    """Integral of (Hg)^p over [lo, hi]."""
    if not 0.0 <= lo <= hi <= 1.0:
        raise DomainError(f"need 0 <= lo <= hi <= 1 (got [{lo}, {hi}])")
    if hi == lo:
        return 0.0
    idx, start, end = _pieces(g, lo, hi)
    v, a = g.values[idx], g.hardy_offsets[idx]
    at_zero = start <= 0.0
    total = np.sum(v[at_zero] ** params.p * (end[at_zero] - start[at_zero]))
    rest = ~at_zero
    total += np.sum(cell_integrals(v[rest], a[rest], start[rest], end[rest], params.p,
                                   method=method))
    return float(total)


def phi_functional(g: StepFunction, params: PParams, method: str = "auto") -> float:
    """Phi_p(g) = integral over (0, 1] of (Hg)^p."""
    return hardy_power_integral(g, params, 0.0, 1.0, method=method)


def phi_prefix(g: StepFunction, params: PParams, upto: float, method: str = "auto") -> float:
    """Integral of (Hg)^p over (0, upto]."""
    return hardy_power_integral(g, params, 0.0, upto, method=method)


def defect(g: StepFunction, c: float, params: PParams, method: str = "auto") -> DefectValue:
    """
    Eigen-defect: integral of |Hg - c*g|^p over (0, 1].

    On a cell the inner expression (1-c)v + a/t is monotone in t; cells are split at
    its zero t* = a / ((c-1) v) when that falls strictly inside.
    """
    if c < 1.0:
        raise DomainError(f"defect needs c >= 1 (got c={c})")
    p = params.p
    t, v, a = g.breakpoints, g.values, g.hardy_offsets
    w = (1.0 - c) * v

    total = abs(w[0]) ** p * t[1]

    lo, hi = t[1:-1], t[2:]
    vv, ww, aa = v[1:], w[1:], a[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        crossing = np.where((c > 1.0) & (vv > 0.0), aa / ((c - 1.0) * vv), np.inf)
    split = (crossing > lo) & (crossing < hi)

    piece_lo = np.concatenate([lo, crossing[split]])
    piece_hi = np.concatenate([np.where(split, crossing, hi), hi[split]])
    piece_w = np.concatenate([ww, ww[split]])
    piece_a = np.concatenate([aa, aa[split]])

    total += np.sum(cell_integrals(piece_w, piece_a, piece_lo, piece_hi, p,
                                   method=method, absolute=True))
    return DefectValue(max(float(total), 0.0))


def lp_distance(g: StepFunction, h: StepFunction, params: PParams) -> float:
    """Integral of |g - h|^p over the merged partition."""
    merged = np.union1d(g.breakpoints, h.breakpoints)
    right = merged[1:]
    diff = np.abs(g(right) - h(right))
    return float(np.sum(diff ** params.p * np.diff(merged)))


# ---------------------------------------------------------------------------
# Projection and rearrangement
# ---------------------------------------------------------------------------

def renormalize_moments(g: StepFunction, target: MomentPair, params: PParams) -> StepFunction:
    """
    Affine map a*g + b (a > 0) matching integral f and p-th moment F.

    With b = f - a*I the p-moment m(a) is convex in a with m'(0) = 0, so it increases
    from f^p; the root is bracketed on [0, a_max] where a_max keeps the last value at 0.

    Raises:
        InfeasibleProjectionError: m(a_max) < F
    """
    x = check_feasible(params, target)
    f, F, p = target.f, target.F, params.p
    I = integral(g)
    if I <= 0.0:
        raise DomainError("cannot renormalize the zero function")

    if abs(I - f) <= MOMENT_MATCH_TOL * f and abs(p_moment(g, params) - F) <= MOMENT_MATCH_TOL * F:
        return g
    if x == 1.0:
        return StepFunction.constant(f, g.breakpoints)

    v, dt = g.values, g.widths
    spread = I - v[-1]
    if spread <= 0.0:
        raise InfeasibleProjectionError("a constant shape cannot reach F > f^p")
    a_max = f / spread
    centered = v - I

    def moment_gap(a: float) -> float:
        return float(np.sum(dt * np.maximum(a * centered + f, 0.0) ** p)) - F

    if moment_gap(a_max) < 0.0:
        raise InfeasibleProjectionError(
            f"shape too flat to reach F={F} with f={f} (max p-moment {moment_gap(a_max) + F})"
        )
    a = bisect(moment_gap, 0.0, a_max, xtol=1e-16 * a_max, maxiter=200)
    values = np.maximum(a * centered + f, 0.0)
    return StepFunction(g.breakpoints, values)


def decreasing_rearrangement(values: Sequence[float], lengths: Sequence[float]) -> StepFunction:
    """
    Non-increasing rearrangement of a function given by values on cells of given lengths.

    Values are sorted descending with their lengths; equal neighbours are merged.

    Raises:
        DomainError: lengths do not sum to 1, or a value or length is negative
    """
    values = np.asarray(values, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    if values.shape != lengths.shape or values.ndim != 1 or len(values) == 0:
        raise DomainError("values and lengths must be matching non-empty vectors")
    if np.any(lengths < 0.0) or np.any(values < 0.0) or not np.all(np.isfinite(values)):
        raise DomainError("values and lengths must be nonnegative")
    if abs(np.sum(lengths) - 1.0) > LENGTH_SUM_TOL:
        raise DomainError(f"cell lengths sum to {np.sum(lengths)}, not 1")

    order = np.argsort(-values, kind="stable")
    v, w = values[order], lengths[order]
    keep = w > 0.0
    v, w = v[keep], w[keep]

    # Merge runs of equal values
    starts = np.concatenate([[True], v[1:] != v[:-1]])
    run = np.cumsum(starts) - 1
    merged_w = np.bincount(run, weights=w)
    merged_v = v[starts]

    breakpoints = np.concatenate([[0.0], np.cumsum(merged_w)])
    breakpoints[-1] = 1.0
    return StepFunction(breakpoints, merged_v)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def to_frame(g: StepFunction) -> pd.DataFrame:
    """Two columns t, v with breakpoints listed as right endpoints."""
    return pd.DataFrame({"t": g.breakpoints[1:], "v": g.values}, columns=["t", "v"])


def to_csv(g: StepFunction, path: Union[str, Path]):
    to_frame(g).to_csv(path, index=False, float_format="%.17g")


def from_csv(path: Union[str, Path]) -> StepFunction:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != ["t", "v"]:
        raise DomainError(f"expected header t,v in {path}")
    t = frame["t"].to_numpy(dtype=float)
    return StepFunction(np.concatenate([[0.0], t]), frame["v"].to_numpy(dtype=float))
