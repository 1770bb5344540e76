"""
Inhomogeneous fractal percolation on the binary tree.

The edge into a level-j node is kept with probability g(2^-j)/g(2^-(j-1)),
so a node at level j survives with probability g(2^-j)/g(1). Node (j, i)
stands for the dyadic interval [i 2^-j, (i+1) 2^-j). Each child edge uses
one keyed 64-bit word of the stream, addressed by (level, index), so a tree
does not depend on the order its nodes are visited in.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from lab.cantor_geometry import IntervalUnion, cantor_cdf
from lab.errors import GaugeError, PercolationBudgetError
from lab.foundations import RandomStream, derive_stream
from lab.gauges import GaugeFn

logger = logging.getLogger(__name__)

MAX_SURVIVORS = 1 << 22
MAX_FULL_DEPTH = 22
MAX_CANTOR_MASS_LEVEL = 20


@dataclass(frozen=True)
class PercTree:
    gauge: GaugeFn
    depth: int
    survivors: Tuple[np.ndarray, ...]

    def count(self, level: int) -> int:
        return int(self.survivors[level].size)

    def interval(self, level: int, index: int) -> Tuple[Fraction, Fraction]:
        return Fraction(index, 2 ** level), Fraction(index + 1, 2 ** level)

    def is_closed_downward(self) -> bool:
        for level in range(1, self.depth + 1):
            if not np.all(np.isin(self.survivors[level] // 2, self.survivors[level - 1])):
                return False
        return True


# ----------------- MASSES ----------------- #

@lru_cache(maxsize=None)
def _cantor_masses(level: int) -> np.ndarray:
    if level > MAX_CANTOR_MASS_LEVEL:
        raise ValueError(f"Cantor masses are tabulated up to level {MAX_CANTOR_MASS_LEVEL}")
    width = 2 ** level
    cdf = [cantor_cdf(Fraction(i, width)) for i in range(width + 1)]
    return np.array([float(b - a) for a, b in zip(cdf, cdf[1:])], dtype=np.float64)


@dataclass(frozen=True)
class MassAssignment:
    """psi(u) = chi(interval of u) for ``lebesgue``, ``cantor`` or a ``table`` on level-m cells."""

    kind: str
    table: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("lebesgue", "cantor", "table"):
            raise ValueError(f"unknown mass {self.kind!r}")
        if self.kind == "table":
            size = len(self.table)
            if size == 0 or size & (size - 1):
                raise ValueError("a mass table needs 2^m entries")
            if any(value < 0 for value in self.table):
                raise ValueError("masses are nonnegative")

    @property
    def table_level(self) -> int:
        return len(self.table).bit_length() - 1

    def level_masses(self, level: int) -> np.ndarray:
        """psi of every level-``level`` node, by index."""
        if self.kind == "lebesgue":
            return np.full(2 ** level, 2.0 ** -level)
        if self.kind == "cantor":
            return _cantor_masses(level)
        table = np.asarray(self.table, dtype=np.float64)
        m = self.table_level
        if level <= m:
            return table.reshape(2 ** level, -1).sum(axis=1)
        return np.repeat(table / 2 ** (level - m), 2 ** (level - m))

    def psi(self, level: int, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if self.kind == "lebesgue":
            return np.full(indices.shape, 2.0 ** -level)
        return self.level_masses(level)[indices]

    @property
    def total(self) -> float:
        return float(self.psi(0, [0])[0])

    def square_sum(self, level: int) -> float:
        if self.kind == "lebesgue":
            return 2.0 ** -level
        return float(np.sum(self.level_masses(level) ** 2))


# ----------------- SAMPLING ----------------- #

def retention(g: GaugeFn, j: int) -> float:
    if j < 1:
        raise ValueError("retention is defined for j >= 1")
    value = g(Fraction(1, 2 ** j)) / g(Fraction(1, 2 ** (j - 1)))
    if not 0 < value <= 1:
        raise GaugeError(f"retention {value} at level {j} is not a probability")
    return value


def sample_tree(g: GaugeFn, depth: int, stream: RandomStream, max_survivors: int = MAX_SURVIVORS) -> PercTree:
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    levels = [np.zeros(1, dtype=np.int64)]
    for level in range(1, depth + 1):
        parents = levels[-1]
        children = np.stack([2 * parents, 2 * parents + 1], axis=1).ravel()
        keep = stream.keyed_uniforms(level, children) < retention(g, level)
        survivors = children[keep]
        if survivors.size > max_survivors:
            raise PercolationBudgetError(
                f"{survivors.size} survivors at level {level} exceed the budget of {max_survivors}"
            )
        levels.append(survivors)
    return PercTree(g, depth, tuple(levels))


def full_tree(g: GaugeFn, depth: int) -> PercTree:
    if not 0 <= depth <= MAX_FULL_DEPTH:
        raise ValueError(f"full trees are built up to depth {MAX_FULL_DEPTH}")
    return PercTree(g, depth, tuple(np.arange(2 ** level, dtype=np.int64) for level in range(depth + 1)))


def intersect(a: PercTree, b: PercTree) -> PercTree:
    if a.depth != b.depth:
        raise ValueError(f"cannot intersect trees of depth {a.depth} and {b.depth}")
    levels = tuple(np.intersect1d(x, y, assume_unique=True) for x, y in zip(a.survivors, b.survivors))
    return PercTree(a.gauge * b.gauge, a.depth, levels)


# ----------------- MARTINGALE ----------------- #

@dataclass(frozen=True)
class MartingaleTrajectory:
    h: GaugeFn
    values: Tuple[float, ...]


def z_trajectory(tree: PercTree, h: GaugeFn, mass: MassAssignment) -> MartingaleTrajectory:
    """Z_j = sum of psi over level-j survivors, divided by h(2^-j)."""
    if tree.gauge != h:
        raise GaugeError(f"tree was sampled with {tree.gauge.describe()}, not {h.describe()}")
    values = tuple(
        float(np.sum(mass.psi(level, tree.survivors[level]))) / h(Fraction(1, 2 ** level))
        for level in range(tree.depth + 1)
    )
    return MartingaleTrajectory(h, values)


def exact_second_moment(h: GaugeFn, mass: MassAssignment, j: int) -> float:
    if j < 0:
        raise ValueError("j must be nonnegative")
    h0 = h(1)
    terms = [mass.total ** 2 / h0 ** 2]
    for level in range(1, j + 1):
        step = 1 / h(Fraction(1, 2 ** level)) - 1 / h(Fraction(1, 2 ** (level - 1)))
        terms.append(mass.square_sum(level) * step / h0)
    return math.fsum(terms)


# ----------------- EXPERIMENTS ----------------- #

@dataclass(frozen=True)
class HitReport:
    frequency: float
    covering_bound: float
    trials: int
    hits: int


def _cells_meeting(union: IntervalUnion, depth: int) -> List[Tuple[int, int]]:
    width = 2 ** depth
    return [(math.floor(a * width), math.ceil(b * width) - 1) for a, b in union.components]


def hit_experiment(E: IntervalUnion, g: GaugeFn, depth: int, trials: int, stream: RandomStream) -> HitReport:
    """Share of trees with a depth-level survivor meeting E, beside (4/g(1)) sum g(|component|)."""
    bound = 4 / g(1) * math.fsum(g(b - a) for a, b in E.components)
    ranges = _cells_meeting(E, depth)
    hits = 0
    for trial in range(trials if ranges else 0):
        leaves = sample_tree(g, depth, derive_stream(stream, "trial", trial)).survivors[depth]
        for lo, hi in ranges:
            if np.searchsorted(leaves, hi, side="right") > np.searchsorted(leaves, lo, side="left"):
                hits += 1
                break
    return HitReport(hits / trials if trials else 0.0, bound, trials, hits)


class MomentAccumulator:
    """Running per-level sums of survivors, Z and Z^2 over trees of one gauge."""

    def __init__(self, h: GaugeFn, depth: int, mass: MassAssignment):
        self.h = h
        self.depth = depth
        self.mass = mass
        self.trees = 0
        self.sums = np.zeros((5, depth + 1))

    def add(self, tree: PercTree):
        counts = np.array([tree.count(level) for level in range(self.depth + 1)], dtype=np.float64)
        z = np.array(z_trajectory(tree, self.h, self.mass).values)
        self.sums += np.stack([counts, counts ** 2, z, z ** 2, z ** 4])
        self.trees += 1

    def merge(self, other: "MomentAccumulator"):
        self.sums += other.sums
        self.trees += other.trees

    def frame(self) -> pd.DataFrame:
        if self.trees < 2:
            raise ValueError("moment summaries need at least two trees")
        n = self.trees
        means = self.sums / n
        g1 = self.h(1)

        def stderr(first, second):
            return np.sqrt(np.maximum(second - first ** 2, 0.0) * n / (n - 1) / n)

        levels = np.arange(self.depth + 1)
        return pd.DataFrame(
            {
                "level": levels,
                "mean_survivors": means[0],
                "se_survivors": stderr(means[0], means[1]),
                "expected_survivors": [2.0 ** j * self.h(Fraction(1, 2 ** j)) / g1 for j in levels],
                "mean_Z": means[2],
                "se_Z": stderr(means[2], means[3]),
                "mean_Z2": means[3],
                "se_Z2": stderr(means[3], means[4]),
                "exact_Z2": [exact_second_moment(self.h, self.mass, int(j)) for j in levels],
            }
        )


def moment_summary(trees: Iterable[PercTree], h: GaugeFn, mass: MassAssignment,
                   depth: Optional[int] = None) -> pd.DataFrame:
    trees = iter(trees)
    first = next(trees)
    accumulator = MomentAccumulator(h, first.depth if depth is None else depth, mass)
    accumulator.add(first)
    for tree in trees:
        accumulator.add(tree)
    return accumulator.frame()


def survivor_counts(g: GaugeFn, h: GaugeFn, depth: int, first: int, last: int,
                    stream: RandomStream) -> Tuple[np.ndarray, np.ndarray]:
    """Final survivor counts of Q_gh and of Q_g intersected with Q_h for samples first..last-1."""
    product, intersection = [], []
    for sample in range(first, last):
        product.append(sample_tree(g * h, depth, derive_stream(stream, "product", sample)).count(depth))
        left = sample_tree(g, depth, derive_stream(stream, "left", sample))
        right = sample_tree(h, depth, derive_stream(stream, "right", sample))
        intersection.append(intersect(left, right).count(depth))
    return np.array(product, dtype=np.float64), np.array(intersection, dtype=np.float64)


def product_identity_experiment(g: GaugeFn, h: GaugeFn, depth: int, samples: int,
                                stream: RandomStream) -> pd.DataFrame:
    product, intersection = survivor_counts(g, h, depth, 0, samples, stream)
    return product_identity_frame(product, intersection)


def product_identity_frame(product: np.ndarray, intersection: np.ndarray) -> pd.DataFrame:
    rows = []
    for construction, counts in (("product", product), ("intersection", intersection)):
        n = counts.size
        variance = float(np.var(counts, ddof=1)) if n > 1 else math.nan
        fourth = float(np.mean((counts - counts.mean()) ** 4)) if n > 1 else math.nan
        rows.append(
            {
                "construction": construction,
                "samples": n,
                "mean": float(counts.mean()),
                "se_mean": math.sqrt(variance / n) if n > 1 else math.nan,
                "variance": variance,
                "se_variance": math.sqrt(max(fourth - variance ** 2, 0.0) / n) if n > 1 else math.nan,
            }
        )
    return pd.DataFrame(rows)


def tree_rows(tree: PercTree, mass: MassAssignment, trial: int, seed: int) -> List[dict]:
    z = z_trajectory(tree, tree.gauge, mass).values
    return [
        {
            "gauge": tree.gauge.describe(),
            "depth": tree.depth,
            "trial": trial,
            "level": level,
            "survivors": tree.count(level),
            "Z": z[level],
            "seed": seed,
        }
        for level in range(tree.depth + 1)
    ]
