"""
Data Models for the Hardy-Bellman Laboratory
Plain dataclasses shared by every stage, plus the error types the CLI maps to exit codes.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd


# Smallest admissible distance of p from 1
P_FLOOR = 1e-9


class DomainError(ValueError):
    """A violated precondition: bad exponent, infeasible moments, out-of-range argument."""


class InfeasibleProjectionError(DomainError):
    """No affine map a*g + b (a > 0, output >= 0) reaches the target moments."""


class AcceptanceFailure(RuntimeError):
    """One or more acceptance checks failed."""

    def __init__(self, failed: List[str]):
        self.failed = list(failed)
        super().__init__(f"acceptance failed: {', '.join(self.failed)}")


@dataclass(frozen=True)
class PParams:
    """The exponent p of the problem."""
    p: float

    def __post_init__(self):
        p = float(self.p)
        if not np.isfinite(p) or p <= 1.0 + P_FLOOR:
            raise DomainError(f"exponent must satisfy p > 1 (got p={self.p})")
        object.__setattr__(self, "p", p)

    @property
    def conjugate(self) -> float:
        """The constant p/(p-1), right end of the bracket of H_p."""
        return self.p / (self.p - 1.0)

    @property
    def is_integer(self) -> bool:
        return float(self.p).is_integer()


@dataclass(frozen=True)
class MomentPair:
    """First moment f and p-th moment F of a candidate function."""
    f: float
    F: float

    def __post_init__(self):
        f, F = float(self.f), float(self.F)
        if not (np.isfinite(f) and np.isfinite(F)) or f <= 0.0 or F <= 0.0:
            raise DomainError(f"moments must be positive and finite (got f={self.f}, F={self.F})")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "F", F)

    def ratio(self, params: PParams) -> float:
        """x = f^p / F, the argument of omega_p."""
        return self.f ** params.p / self.F


@dataclass(frozen=True)
class OmegaValue:
    """c = omega_p(x) together with the ratio x it inverts."""
    c: float
    x: float
    residual: float = 0.0           # |H_p(c) - x|


@dataclass(frozen=True)
class DefectValue:
    """The eigen-defect integral of |Hg - c*g|^p."""
    value: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class PowerLawFunction:
    """
    g(t) = k * t^e on (0, 1].

    For the extremal function e = -1 + 1/c, so the Hardy average is exactly c*g.
    """
    k: float
    e: float
    c: float = 1.0                  # 1/(1+e), kept exactly rather than recomputed from e

    def __call__(self, t):
        return self.k * np.power(t, self.e)

    @property
    def is_constant(self) -> bool:
        return self.e == 0.0

    def integral(self) -> float:
        return self.k * self.c

    def p_moment(self, params: PParams) -> float:
        return self.k ** params.p / (1.0 + params.p * self.e)

    def cumulative(self, t):
        """Closed form of the integral of g over (0, t]."""
        return self.k * self.c * np.power(t, 1.0 / self.c)

    def hardy_at(self, t):
        return self.cumulative(t) / t

    def tail_p_mass(self, params: PParams, delta: float) -> float:
        """Integral of g^p over (0, delta]."""
        q = 1.0 + params.p * self.e
        return self.k ** params.p * delta ** q / q

    def height_time(self, h: float) -> float:
        """The point tau where g(tau) = h, so g >= h exactly on (0, tau]."""
        if self.is_constant:
            return 1.0 if h <= self.k else 0.0
        return float((h / self.k) ** (1.0 / self.e))

    def cell_averages(self, breakpoints: np.ndarray) -> np.ndarray:
        """Exact averages of g over the cells of a partition of (0, 1]."""
        lo, hi = breakpoints[:-1], breakpoints[1:]
        if self.is_constant:
            return np.full(len(hi), self.k)
        out = np.empty(len(hi))
        out[0] = self.k * self.c * hi[0] ** self.e
        l, r = lo[1:], hi[1:]
        log_ratio = np.log(r / l)
        out[1:] = (self.k * self.c * np.power(l, self.e)
                   * np.expm1(log_ratio / self.c) / np.expm1(log_ratio))
        return out

    def truncated_cell_averages(self, breakpoints: np.ndarray, h: float) -> np.ndarray:
        """Exact averages of min(g, h) over the cells of a partition of (0, 1]."""
        tau = self.height_time(h)
        lo, hi = breakpoints[:-1], breakpoints[1:]
        out = self.cell_averages(breakpoints)
        out[hi <= tau] = h
        straddle = (lo < tau) & (hi > tau)
        if np.any(straddle):
            l, r = lo[straddle], hi[straddle]
            mass = h * (tau - l) + self.cumulative(r) - self.cumulative(tau)
            out[straddle] = mass / (r - l)
        return np.minimum(out, h)


@dataclass(frozen=True)
class ExtremalSequenceSpec:
    """One member g_n of a near-extremal family."""
    kind: str                       # "truncation", "mollification" or "perturbation"
    n: int
    params: PParams
    moments: MomentPair
    cells: int = 2 ** 16            # grid resolution for truncation and perturbation
    cutoff: str = "mass"            # truncation rule: "mass" or "time"

    KINDS = ("truncation", "mollification", "perturbation")
    CUTOFFS = ("mass", "time")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown sequence kind: {self.kind}")
        if self.cutoff not in self.CUTOFFS:
            raise DomainError(f"unknown cutoff rule: {self.cutoff}")
        if int(self.n) < 1:
            raise DomainError(f"sequence index must be positive (got n={self.n})")
        if int(self.cells) < 2:
            raise DomainError(f"need at least 2 cells (got {self.cells})")


@dataclass(frozen=True)
class AscentConfig:
    """Settings of one projected-gradient ascent run."""
    cells: int = 2 ** 12
    max_iters: int = 2000
    step_size: float = 1e-2
    tol_obj: float = 1e-12
    seed: int = 0
    max_step: float = 1e6
    grow_after: int = 5             # consecutive accepts before the step doubles

    def __post_init__(self):
        if self.cells < 8:
            raise DomainError(f"ascent needs at least 8 cells (got {self.cells})")
        if self.tol_obj <= 0 or self.step_size <= 0 or self.max_step < self.step_size:
            raise DomainError("ascent tolerances and step sizes must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")


@dataclass
class AscentRecord:
    """One iteration of the ascent."""
    iteration: int
    objective: float
    defect: float
    lp_dist: float
    accepted: bool
    step: float


@dataclass
class AscentTrace:
    """Per-iteration history of an ascent run."""
    records: List[AscentRecord] = field(default_factory=list)
    converged: bool = False
    bellman: float = float("nan")   # the Bellman value the run is measured against

    def append(self, record: AscentRecord):
        self.records.append(record)

    def accepted(self) -> List[AscentRecord]:
        return [r for r in self.records if r.accepted]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iter": [r.iteration for r in self.records],
                "objective": [r.objective for r in self.records],
                "defect": [r.defect for r in self.records],
                "lp_dist": [r.lp_dist for r in self.records],
                "accepted": [int(r.accepted) for r in self.records],
            },
            columns=["iter", "objective", "defect", "lp_dist", "accepted"],
        )


@dataclass(frozen=True)
class SandwichResult:
    """Lower Riemann sum, realized tree value and Hardy upper bound for one alpha tree."""
    a: float
    gamma: float
    m_a: int
    depth: int
    lower: float
    tree_value: float
    upper: float
    limit: float                    # Hardy integral over (0, gamma]
    tail: float                     # Hardy integral over the uncovered core

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def relative_gap(self) -> float:
        return self.gap / self.upper if self.upper > 0 else 0.0


@dataclass
class RunReport:
    """Serializable record of one experiment."""
    command: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)
    series: Dict[str, pd.DataFrame] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = ""
    passed: Optional[bool] = None
