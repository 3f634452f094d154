"""
Dyadic Simulator
Tree-side machinery on [0, 1): the maximal operator over dyadic intervals, the alpha tree
with its ranked remainders, the rearrangement phi_a of a non-increasing g onto that tree,
and the sandwich lower <= tree value <= upper that ties the tree to the Hardy operator.

Alpha tree layout: a node I of rank m occupies [x, x + mu(I)); its b children come first,
each of measure (1-a) mu(I) / b, and the remainder A_I of measure a mu(I) sits at the right
end. The rank-m chunk of g, its restriction to ((1-a)^(m+1), (1-a)^m], is copied onto every
A_I of rank m compressed by b^m, so t maps to x + t / b^m. With b = 1 this is the identity.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .models import DomainError, PParams, SandwichResult
from .monotone_fn import (
    StepFunction,
    cumulative,
    decreasing_rearrangement,
    hardy_power_integral,
    integral,
    phi_functional,
    phi_prefix,
)

logger = logging.getLogger(__name__)

DEFAULT_COVERAGE = 1e-6

# Uncovered g-mass above this fraction of the total is flagged
TRUNCATION_FLAG = 1e-9

MAX_NODES_PER_RANK = 2 ** 16
MAX_CELLS = 5_000_000

# Dyadic refinement depth inside each remainder
REMAINDER_DEPTH = 8


# ---------------------------------------------------------------------------
# Dyadic tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicTree:
    """Dyadic intervals [j 2^-m, (j+1) 2^-m) of [0, 1) down to depth N."""
    depth: int

    def __post_init__(self):
        if not 0 <= self.depth <= 24:
            raise DomainError(f"dyadic depth must lie in [0, 24] (got {self.depth})")

    @property
    def leaves(self) -> int:
        return 2 ** self.depth

    @property
    def leaf_measure(self) -> float:
        return 2.0 ** (-self.depth)

    def level_averages(self, phi: "LeafFunction", m: int) -> np.ndarray:
        """Averages of phi over the 2^m intervals of level m."""
        return phi.values.reshape(2 ** m, -1).mean(axis=1)


@dataclass(frozen=True)
class LeafFunction:
    """Nonnegative values on the leaves of a dyadic tree."""
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or len(v) == 0 or (len(v) & (len(v) - 1)) != 0:
            raise DomainError("leaf values must be a vector of length 2^N")
        if not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise DomainError("leaf values must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def depth(self) -> int:
        return int(len(self.values)).bit_length() - 1

    def rearranged(self) -> StepFunction:
        n = len(self.values)
        return decreasing_rearrangement(self.values, np.full(n, 1.0 / n))


def maximal_operator(tree: DyadicTree, phi: LeafFunction) -> LeafFunction:
    """Per leaf, the largest average over the dyadic intervals containing it (top-down pass)."""
    if phi.depth != tree.depth:
        raise DomainError(f"leaf function has depth {phi.depth}, tree has {tree.depth}")
    running = tree.level_averages(phi, 0)
    for m in range(1, tree.depth + 1):
        running = np.maximum(np.repeat(running, 2), tree.level_averages(phi, m))
    return LeafFunction(running)


def symmetrization_check(tree: DyadicTree, phi: LeafFunction, params: PParams,
                         method: str = "auto") -> Tuple[float, float]:
    """
    Both sides of the symmetrization inequality with K the whole space.

    Returns:
        (lhs, rhs) with lhs the leaf mean of (M phi)^p and rhs = Phi_p(phi*)
    """
    maximal = maximal_operator(tree, phi)
    lhs = float(np.mean(maximal.values ** params.p))
    rhs = phi_functional(phi.rearranged(), params, method=method)
    return lhs, rhs


def tree_defect(tree: DyadicTree, phi: LeafFunction, c: float, params: PParams) -> float:
    """Leaf mean of |M phi - c phi|^p."""
    maximal = maximal_operator(tree, phi)
    return float(np.mean(np.abs(maximal.values - c * phi.values) ** params.p))


def lp_bound_check(tree: DyadicTree, phi: LeafFunction, params: PParams) -> Tuple[float, float]:
    """(||M phi||_p, p/(p-1) ||phi||_p)."""
    maximal = maximal_operator(tree, phi)
    p = params.p
    lhs = float(np.mean(maximal.values ** p)) ** (1.0 / p)
    rhs = params.conjugate * float(np.mean(phi.values ** p)) ** (1.0 / p)
    return lhs, rhs


def random_leaf_function(depth: int, rng: np.random.Generator) -> LeafFunction:
    """Exponential samples with roughly a quarter of the leaves zeroed."""
    n = 2 ** depth
    values = rng.exponential(size=n) * (rng.random(n) >= 0.25)
    return LeafFunction(values)


# ---------------------------------------------------------------------------
# Alpha tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaTree:
    """
    Ranked family S_m on [0, 1) for a parameter a in (0, 1).

    Rank m holds b^m nodes of measure (1-a)^m / b^m each; their remainders together
    measure (1-a)^m - (1-a)^(m+1). Ranks run 0..depth; the rank depth+1 nodes form the
    uncovered core.
    """
    a: float
    depth: int
    branching: int = 1

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise DomainError(f"alpha-tree parameter must lie in (0, 1) (got a={self.a})")
        if self.depth < 0:
            raise DomainError("alpha-tree depth must be nonnegative")
        if self.branching < 1:
            raise DomainError("branching factor must be at least 1")
        if self.branching ** (self.depth + 1) > MAX_NODES_PER_RANK:
            raise DomainError(
                f"branching {self.branching} at depth {self.depth} exceeds "
                f"{MAX_NODES_PER_RANK} nodes per rank"
            )

    @classmethod
    def build(cls, a: float, coverage: float = DEFAULT_COVERAGE, branching: int = 1,
              depth: Optional[int] = None) -> "AlphaTree":
        """Tree of the least depth M with (1-a)^M <= coverage, unless depth is given."""
        if not 0.0 < a < 1.0:
            raise DomainError(f"alpha-tree parameter must lie in (0, 1) (got a={a})")
        if depth is None:
            depth = max(int(math.ceil(math.log(coverage) / math.log1p(-a))), 0)
            while (1.0 - a) ** depth > coverage:
                depth += 1
            while depth > 0 and (1.0 - a) ** (depth - 1) <= coverage:
                depth -= 1
        return cls(a=a, depth=depth, branching=branching)

    def level(self, m: int) -> float:
        """mu(S_m) = (1-a)^m."""
        return (1.0 - self.a) ** m

    def rank_measure(self, m: int) -> float:
        """Total measure of the rank-m remainders."""
        return self.level(m) - self.level(m + 1)

    def node_measure(self, m: int) -> float:
        return self.level(m) / self.branching ** m

    def covered_measure(self) -> float:
        return math.fsum(self.rank_measure(m) for m in range(self.depth + 1))

    @property
    def tail_measure(self) -> float:
        return self.level(self.depth + 1)

    def rank_for(self, gamma: float) -> int:
        """m_a: the largest rank with (1-a)^m >= gamma, capped at the depth."""
        if not 0.0 < gamma <= 1.0:
            raise DomainError(f"gamma must lie in (0, 1] (got {gamma})")
        m = 0
        while m < self.depth and self.level(m + 1) >= gamma:
            m += 1
        return m

    def gamma(self, g: StepFunction, m: int) -> float:
        """Average of g over the rank-m chunk ((1-a)^(m+1), (1-a)^m]."""
        hi, lo = self.level(m), self.level(m + 1)
        return (cumulative(g, hi) - cumulative(g, lo)) / (self.a * hi)

    def theta(self, g: StepFunction, m: int) -> float:
        """Average of g over (0, (1-a)^m]."""
        s = self.level(m)
        return cumulative(g, s) / s


@dataclass
class AlphaFunction:
    """phi_a realized on [0, 1) as cells, with node and remainder masses per rank."""
    tree: AlphaTree
    starts: np.ndarray
    widths: np.ndarray
    values: np.ndarray
    remainder_masses: List[np.ndarray] = field(default_factory=list)  # ranks 0..M
    node_masses: List[np.ndarray] = field(default_factory=list)       # ranks 0..M+1
    uncovered_mass: float = 0.0
    truncated: bool = False

    def rearranged(self) -> StepFunction:
        return decreasing_rearrangement(self.values, self.widths)

    def mass(self) -> float:
        return math.fsum(self.node_masses[0])


def _chunk(g: StepFunction, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cells of g restricted to (lo, hi]: starts, widths, values."""
    t = g.breakpoints
    start = np.maximum(t[:-1], lo)
    end = np.minimum(t[1:], hi)
    keep = end > start
    return start[keep], (end - start)[keep], g.values[keep]


def _node_positions(tree: AlphaTree) -> List[np.ndarray]:
    """Left ends of the nodes of ranks 0..M+1."""
    b = tree.branching
    positions = [np.zeros(1)]
    for m in range(tree.depth + 1):
        child = tree.node_measure(m + 1)
        positions.append((positions[-1][:, None] + child * np.arange(b)[None, :]).ravel())
    return positions


def build_phi_a(alpha: AlphaTree, g: StepFunction) -> AlphaFunction:
    """
    Transport g onto the alpha tree.

    Every remainder of rank m gets a copy of the rank-m chunk of g compressed by b^m, so
    each rank-m node has the same average and phi_a has the distribution of g. The core
    nodes carry the chunk (0, (1-a)^(M+1)].
    """
    b, M = alpha.branching, alpha.depth
    positions = _node_positions(alpha)

    sizes = []
    for m in range(M + 2):
        hi = alpha.level(m)
        lo = alpha.level(m + 1) if m <= M else 0.0
        sizes.append(b ** m * int(np.count_nonzero(
            np.minimum(g.breakpoints[1:], hi) > np.maximum(g.breakpoints[:-1], lo))))
    if sum(sizes) > MAX_CELLS:
        raise DomainError(f"alpha-tree realization needs {sum(sizes)} cells (cap {MAX_CELLS})")

    starts, widths, values = [], [], []
    rank_masses: List[np.ndarray] = []
    for m in range(M + 2):
        hi = alpha.level(m)
        lo = alpha.level(m + 1) if m <= M else 0.0
        c_start, c_width, c_value = _chunk(g, lo, hi)
        scale = float(b ** m)
        node_start = positions[m][:, None] + c_start[None, :] / scale
        cell_width = np.broadcast_to(c_width / scale, node_start.shape)
        cell_value = np.broadcast_to(c_value, node_start.shape)
        starts.append(node_start.ravel())
        widths.append(cell_width.ravel())
        values.append(cell_value.ravel())
        rank_masses.append((cell_width * cell_value).sum(axis=1))

    # Bottom-up node masses: remainder plus children
    node_masses: List[np.ndarray] = [np.empty(0)] * (M + 2)
    node_masses[M + 1] = rank_masses[M + 1]
    for m in range(M, -1, -1):
        node_masses[m] = rank_masses[m] + node_masses[m + 1].reshape(b ** m, b).sum(axis=1)

    total = integral(g)
    uncovered = cumulative(g, alpha.tail_measure)
    truncated = uncovered > TRUNCATION_FLAG * total
    if truncated:
        logger.warning(
            f"a={alpha.a}: depth {M} leaves g-mass {uncovered:.3e} in the core "
            f"(measure {alpha.tail_measure:.3e})"
        )

    order = np.argsort(np.concatenate(starts), kind="stable")
    return AlphaFunction(
        tree=alpha,
        starts=np.concatenate(starts)[order],
        widths=np.concatenate(widths)[order],
        values=np.concatenate(values)[order],
        remainder_masses=rank_masses[:M + 1],
        node_masses=node_masses,
        uncovered_mass=float(uncovered),
        truncated=bool(truncated),
    )


def average_identity_check(alpha: AlphaTree, phi_a: AlphaFunction, g: StepFunction, m: int) -> float:
    """|Av over S_m of phi_a - (1/(1-a)^m) * integral of g over (0, (1-a)^m]|."""
    if not 0 <= m <= alpha.depth + 1:
        raise DomainError(f"rank {m} outside 0..{alpha.depth + 1}")
    s = alpha.level(m)
    tree_side = math.fsum(phi_a.node_masses[m]) / s
    return abs(tree_side - cumulative(g, s) / s)


def remainder_cover(g: StepFunction, lo: float, hi: float,
                    depth: int = REMAINDER_DEPTH) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Dyadic cover of a remainder down to `depth`, refined by the cells of g.

    Works in chunk coordinates (lo, hi]; every copy of the chunk on the tree is an affine
    image of it, so the cover is the same on each. Returns (starts, widths, values, cover_max)
    per refined cell, with cover_max the running maximum of the cover averages over the
    pieces holding the cell.
    """
    if not 0.0 <= lo < hi <= 1.0:
        raise DomainError(f"need 0 <= lo < hi <= 1 (got ({lo}, {hi}])")
    pieces = 2 ** depth
    bp = g.breakpoints
    edges = np.union1d(bp[(bp > lo) & (bp < hi)], np.linspace(lo, hi, pieces + 1))
    starts, widths = edges[:-1], np.diff(edges)
    mids = starts + 0.5 * widths
    values = g.values[np.clip(np.searchsorted(bp, mids, side="left") - 1, 0, g.n - 1)]
    piece = np.minimum(((mids - lo) / (hi - lo) * pieces).astype(int), pieces - 1)
    masses = np.bincount(piece, weights=values * widths, minlength=pieces)

    running = None
    for k in range(depth + 1):
        avg = masses.reshape(2 ** k, -1).sum(axis=1) * (2 ** k / (hi - lo))
        running = avg if running is None else np.maximum(np.repeat(running, 2), avg)
    return starts, widths, values, running[piece]


def tree_value(alpha: AlphaTree, phi_a: AlphaFunction, g: StepFunction, params: PParams,
               m_a: int, cover_depth: int = REMAINDER_DEPTH) -> float:
    """
    Integral of (M phi_a)^p over the covered part of S_{m_a}.

    M runs over the realized family: the alpha-tree nodes, the dyadic cover of each
    remainder down to cover_depth, and the cells of phi_a inside it. On a rank-m remainder
    phi_a is the rank-m chunk of g, so the cover is taken on g and scaled by b^-m per node.
    """
    b, p = alpha.branching, params.p
    running = phi_a.node_masses[0] / alpha.node_measure(0)
    terms = []
    for m in range(alpha.depth + 1):
        if m > 0:
            node_avg = phi_a.node_masses[m] / alpha.node_measure(m)
            running = np.maximum(np.repeat(running, b), node_avg)
        if m < m_a:
            continue
        _, widths, values, cover_max = remainder_cover(
            g, alpha.level(m + 1), alpha.level(m), cover_depth)
        local = np.maximum(cover_max, values)
        # Nodes of one rank share few distinct running maxima
        levels, counts = np.unique(running, return_counts=True)
        maximal = np.maximum(levels[:, None], local[None, :])
        terms.append(float(counts @ (maximal ** p @ widths)) / b ** m)
    return math.fsum(terms)


def sandwich(alpha: AlphaTree, g: StepFunction, params: PParams, gamma: float = 1.0,
             phi_a: Optional[AlphaFunction] = None, method: str = "auto",
             cover_depth: int = REMAINDER_DEPTH) -> SandwichResult:
    """
    Lower Riemann sum, realized tree value and Hardy upper bound over ranks m_a..M.

    lower = sum of theta_l^p * mu(A_l) with theta_l the average of g over (0, (1-a)^l];
    upper = integral of (Hg)^p over ((1-a)^(M+1), (1-a)^(m_a)].
    """
    m_a = alpha.rank_for(gamma)
    if phi_a is None:
        phi_a = build_phi_a(alpha, g)

    lower = math.fsum(alpha.theta(g, m) ** params.p * alpha.rank_measure(m)
                      for m in range(m_a, alpha.depth + 1))
    realized = tree_value(alpha, phi_a, g, params, m_a, cover_depth=cover_depth)
    upper = hardy_power_integral(g, params, alpha.tail_measure, alpha.level(m_a), method=method)
    limit = phi_prefix(g, params, gamma, method=method)
    tail = phi_prefix(g, params, alpha.tail_measure, method=method)

    return SandwichResult(
        a=alpha.a, gamma=gamma, m_a=m_a, depth=alpha.depth,
        lower=lower, tree_value=realized, upper=upper, limit=limit, tail=tail,
    )


def sandwich_sweep(g: StepFunction, params: PParams, schedule: Sequence[float],
                   gamma: float = 1.0, branching: int = 1, depth: Optional[int] = None,
                   coverage: float = DEFAULT_COVERAGE, method: str = "auto",
                   workers: int = 4) -> pd.DataFrame:
    """Sandwich over a schedule of a values; rows in schedule order."""
    def run(a: float) -> SandwichResult:
        alpha = AlphaTree.build(a, coverage=coverage, branching=branching, depth=depth)
        return sandwich(alpha, g, params, gamma=gamma, method=method)

    results: Dict[float, SandwichResult] = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(run, a): a for a in schedule}
        for future in as_completed(futures):
            a = futures[future]
            results[a] = future.result()
            logger.info(f"a={a}: lower={results[a].lower:.10g}, upper={results[a].upper:.10g}")

    rows = [{
        "a": a,
        "lower": results[a].lower,
        "tree": results[a].tree_value,
        "upper": results[a].upper,
        "gap": results[a].gap,
        "relative_gap": results[a].relative_gap,
        "depth": results[a].depth,
        "limit": results[a].limit,
        "tail": results[a].tail,
    } for a in schedule]
    return pd.DataFrame(rows, columns=["a", "lower", "tree", "upper", "gap", "relative_gap",
                                       "depth", "limit", "tail"])


def symmetrization_sweep(depth: int, samples: int, params: PParams, seed: int = 0,
                         method: str = "auto") -> pd.DataFrame:
    """Symmetrization, tree-defect and L^p-bound checks on random leaf functions."""
    tree = DyadicTree(depth)
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(samples):
        phi = random_leaf_function(depth, rng)
        lhs, rhs = symmetrization_check(tree, phi, params, method=method)
        norm_m, bound = lp_bound_check(tree, phi, params)
        rows.append({
            "sample": i,
            "lhs": lhs,
            "rhs": rhs,
            "maximal_norm": norm_m,
            "lp_bound": bound,
            "tree_defect": tree_defect(tree, phi, 1.0, params),
        })
    return pd.DataFrame(rows, columns=["sample", "lhs", "rhs", "maximal_norm", "lp_bound",
                                       "tree_defect"])
