"""
Random covering experiments on the circle and on the Cantor set.

Points X_n come from a ``PointProcess``; radii from a ``RadiiFamily`` raised
to the power nu. A *window* is the set of indices whose radius r_n**nu lies
in [3**-(L+1), 3**-L); censuses at level L only use that window, so every
level sees fresh points.

Point n of a process is drawn from the block (n - 1) // POINT_BLOCK of a
stream derived from the caller's stream. Two windows that share an index
therefore share the point, whatever else was sampled before.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
import pandas as pd
from scipy import stats

from lab.cantor_geometry import (
    IntervalUnion,
    cantor_arc_measure,
    cantor_successor,
    distance_to_cantor,
    level_cover_indices,
    removed_gap,
)
from lab.errors import EstimationError, PrecisionBudgetError
from lab.foundations import (
    KAPPA,
    LOG3,
    BigFixed,
    CirclePoint,
    RandomStream,
    derive_stream,
    guard_precision,
    reduce_to_circle,
)
from lab.exponents import conjectured_vb_dimension
from lab.gauges import GaugeFn, RadiiFamily

logger = logging.getLogger(__name__)

POINT_BLOCK = 4096
CANTOR_DIGITS = 34
CIRCLE_BITS = 53
MAX_CENSUS_LEVEL = 16
COVERAGE_CHUNK = 1 << 16

# Envelope constants for #K_n(G) * g(r_n), measured on G = K with g = r^kappa
HIT_ENVELOPE_LOW = 0.9
HIT_ENVELOPE_HIGH = 10.0

Target = Union[str, IntervalUnion]


# ----------------- INTEGER SEQUENCES ----------------- #

@dataclass(frozen=True)
class IntegerSequence:
    """a_n for n >= 1: ``exp2_square`` 2^(n^2), ``geometric`` base^n,
    ``superexp`` floor(n^(exponent*n)) or an ``explicit`` list."""

    kind: str
    base: int = 2
    exponent: float = 1.5
    values: Tuple[int, ...] = field(default_factory=tuple)

    @classmethod
    def parse(cls, text: str) -> "IntegerSequence":
        kind, _, rest = text.strip().partition(":")
        if kind == "exp2_square":
            return cls(kind)
        if kind == "geometric":
            return cls(kind, base=int(rest or 2))
        if kind == "superexp":
            return cls(kind, exponent=float(rest or 1.5))
        if kind == "explicit":
            return cls(kind, values=tuple(int(v) for v in rest.split(",") if v))
        raise ValueError(f"cannot read integer sequence {text!r}")

    def term(self, n: int) -> int:
        if n < 1:
            raise ValueError("sequence indices start at 1")
        if self.kind == "exp2_square":
            return 1 << (n * n)
        if self.kind == "geometric":
            return self.base ** n
        if self.kind == "superexp":
            bits = int(self.exponent * n * math.log2(max(n, 2))) + 64
            with mpmath.workprec(bits):
                return int(mpmath.floor(mpmath.mpf(n) ** (mpmath.mpf(self.exponent) * n)))
        if self.kind == "explicit":
            if n > len(self.values):
                raise PrecisionBudgetError(f"explicit sequence has only {len(self.values)} terms")
            return self.values[n - 1]
        raise ValueError(f"unknown sequence kind {self.kind!r}")


def theta_upper_bound(a: IntegerSequence, r: RadiiFamily, N: int) -> float:
    """3 exp(4 sum_{n<=N} a_n / (r_n a_(n+1))); +inf on overflow."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    terms = [
        float(Fraction(a.term(n), a.term(n + 1))) / r.radius(n) for n in range(1, N + 1)
    ]
    try:
        return 3.0 * math.exp(4.0 * math.fsum(terms))
    except OverflowError:
        return math.inf


def growth_condition(a: IntegerSequence, r: RadiiFamily, n: int) -> float:
    """log(a_n / a_(n+1)) / log(r_n); superexponential growth needs this above 1 + rho."""
    ratio = Fraction(a.term(n), a.term(n + 1))
    return (math.log(ratio.numerator) - math.log(ratio.denominator)) / math.log(r.radius(n))


# ----------------- POINT PROCESSES ----------------- #

def _block_draws(stream: RandomStream, label: str, indices: np.ndarray, draw) -> np.ndarray:
    """Values for 1-based ``indices``; block b comes from derive_stream(stream, label, b)."""
    indices = np.asarray(indices, dtype=np.int64)
    flat = indices.ravel()
    blocks = (flat - 1) // POINT_BLOCK
    offsets = (flat - 1) % POINT_BLOCK
    order = np.argsort(blocks, kind="stable")
    unique, starts = np.unique(blocks[order], return_index=True)
    ends = np.append(starts[1:], flat.size)
    out = None
    for block, start, end in zip(unique, starts, ends):
        values = draw(derive_stream(stream, label, int(block)).generator(), POINT_BLOCK)
        if out is None:
            out = np.empty(flat.shape, dtype=values.dtype)
        picked = order[start:end]
        out[picked] = values[offsets[picked]]
    return out.reshape(indices.shape) if out is not None else np.zeros(0)


def _circle_words(generator: np.random.Generator, size: int) -> np.ndarray:
    return generator.integers(0, 1 << CIRCLE_BITS, size=size, dtype=np.int64)


def _cantor_words(generator: np.random.Generator, size: int) -> np.ndarray:
    return generator.integers(0, 1 << CANTOR_DIGITS, size=size, dtype=np.int64)


_CANTOR_WEIGHTS = np.array([2.0 * 3.0 ** -(i + 1) for i in range(CANTOR_DIGITS)])
_CANTOR_SHIFTS = np.arange(CANTOR_DIGITS - 1, -1, -1, dtype=np.int64)


def _cantor_values(words: np.ndarray) -> np.ndarray:
    bits = (words[:, None] >> _CANTOR_SHIFTS) & 1
    return bits.astype(np.float64) @ _CANTOR_WEIGHTS


def _cantor_fraction(word: int) -> Fraction:
    return sum(
        (Fraction(2, 3 ** (i + 1)) for i in range(CANTOR_DIGITS) if (word >> (CANTOR_DIGITS - 1 - i)) & 1),
        Fraction(0),
    )


class PointProcess:
    """Base class; subclasses draw X_n for 1-based indices."""

    name = "process"
    iid = False

    def sample(self, indices, stream: RandomStream) -> np.ndarray:
        raise NotImplementedError

    def sample_point(self, n: int, stream: RandomStream) -> CirclePoint:
        raise NotImplementedError

    def cells(self, indices, grid: np.ndarray, stream: RandomStream) -> np.ndarray:
        """floor(q_n * X_n) for each index."""
        values = self.sample(indices, stream)
        return np.minimum(np.floor(values * grid).astype(np.int64), grid.astype(np.int64) - 1)


@dataclass(frozen=True)
class IidUniformCircle(PointProcess):
    name = "iid_circle"
    iid = True

    def sample(self, indices, stream):
        return _block_draws(stream, "circle", indices, _circle_words) * 2.0 ** -CIRCLE_BITS

    def sample_point(self, n, stream):
        word = int(_block_draws(stream, "circle", np.array([n]), _circle_words)[0])
        return CirclePoint(Fraction(word, 1 << CIRCLE_BITS))


@dataclass(frozen=True)
class IidUniformCantor(PointProcess):
    """Uniform points of K truncated to CANTOR_DIGITS ternary digits (exact members of K)."""

    name = "iid_cantor"
    iid = True

    def sample(self, indices, stream):
        return _cantor_values(_block_draws(stream, "cantor", indices, _cantor_words))

    def sample_point(self, n, stream):
        word = int(_block_draws(stream, "cantor", np.array([n]), _cantor_words)[0])
        return CirclePoint(_cantor_fraction(word))


@dataclass(frozen=True)
class FractionalParts(PointProcess):
    """{a_n X} for one X per stream, held at ceil(log2 a_N) + 64 bits."""

    sequence: IntegerSequence
    max_index: int
    fixed_x: Optional[Fraction] = None
    name = "fractional"

    @property
    def precision_bits(self) -> int:
        return guard_precision(self.sequence.term(self.max_index))

    def _check(self, indices):
        if np.any(np.asarray(indices) > self.max_index):
            raise PrecisionBudgetError(
                f"fractional parts configured up to n = {self.max_index}, asked for more"
            )

    def draw_x(self, stream: RandomStream) -> BigFixed:
        if self.fixed_x is not None:
            return BigFixed.from_rational(self.fixed_x, self.precision_bits)
        bits = self.precision_bits
        words = derive_stream(stream, "X", 0).words((bits + 63) // 64)
        mantissa = 0
        for word in words:
            mantissa = (mantissa << 64) | int(word)
        return BigFixed(mantissa >> (64 * len(words) - bits), bits)

    def _exact(self, n: int, x: BigFixed) -> Fraction:
        if self.fixed_x is not None:
            value = self.sequence.term(n) * self.fixed_x
            return value - math.floor(value)
        return (x * self.sequence.term(n)).fractional_part().to_fraction()

    def sample(self, indices, stream):
        self._check(indices)
        x = self.draw_x(stream)
        return np.array([float(self._exact(int(n), x)) for n in np.asarray(indices)], dtype=np.float64)

    def sample_point(self, n, stream):
        self._check([n])
        return CirclePoint(self._exact(n, self.draw_x(stream)))

    def cells(self, indices, grid, stream):
        self._check(indices)
        x = self.draw_x(stream)
        return np.array(
            [math.floor(self._exact(int(n), x) * int(q)) for n, q in zip(np.asarray(indices), grid)],
            dtype=np.int64,
        )


@dataclass(frozen=True)
class RotatedRationals(PointProcess):
    """p_n/q_n - alpha over an enumeration; alpha=None draws one alpha per stream."""

    radii: RadiiFamily
    alpha: Optional[Fraction] = None
    name = "rotated"

    def _alpha(self, stream) -> Fraction:
        if self.alpha is not None:
            return self.alpha
        word = int(derive_stream(stream, "alpha", 0).generator().integers(0, 1 << CIRCLE_BITS))
        return Fraction(word, 1 << CIRCLE_BITS)

    def sample(self, indices, stream):
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            return np.zeros(0)
        _, p, q = _pairs_for(self.radii, indices)
        values = p / q - float(self._alpha(stream))
        return values - np.floor(values)

    def sample_point(self, n, stream):
        _, p, q = self.radii.pairs(n, n)
        return reduce_to_circle(Fraction(int(p[0]), int(q[0])) - self._alpha(stream))


@dataclass(frozen=True)
class DeterministicList(PointProcess):
    points: Tuple[Fraction, ...]
    name = "deterministic"

    @classmethod
    def triadic(cls, count: int, shifted: bool = False) -> "DeterministicList":
        """p/3^j over {0,2}-digit numerators prime to 3, optionally moved left by 1/(2*3^j)."""
        points: List[Fraction] = []
        level = 1
        while len(points) < count:
            for p in 2 + 3 * level_cover_indices(level - 1):
                value = Fraction(int(p), 3 ** level)
                if shifted:
                    value -= Fraction(1, 2 * 3 ** level)
                points.append(value)
                if len(points) == count:
                    break
            level += 1
        return cls(tuple(points))

    def sample(self, indices, stream):
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and indices.max() > len(self.points):
            raise PrecisionBudgetError("index beyond the deterministic list")
        return np.array([float(self.points[n - 1]) for n in indices], dtype=np.float64)

    def sample_point(self, n, stream):
        return reduce_to_circle(self.points[n - 1])


def in_enumerated_cantor(p: np.ndarray, q: np.ndarray, rule: str) -> np.ndarray:
    """Mask of pairs selected by a Cantor filter: ``triadic``, ``exact`` or ``none``."""
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    if rule == "none":
        return np.zeros(p.shape, dtype=bool)
    if rule == "exact":
        return np.array([removed_gap(int(a), int(b)) is None for a, b in zip(p, q)], dtype=bool)
    if rule != "triadic":
        raise ValueError(f"unknown Cantor filter {rule!r}")
    power = q.copy()
    while np.any((power % 3 == 0) & (power > 1)):
        power = np.where(power % 3 == 0, power // 3, power)
    mask = (power == 1) & (q > 1) & (p % 3 == 2)
    digits = p.copy()
    while np.any(digits > 0):
        mask &= digits % 3 != 1
        digits //= 3
    return mask


def _pairs_for(radii: RadiiFamily, indices: np.ndarray):
    _, p, q = radii.pairs(int(indices.min()), int(indices.max()))
    offset = indices - indices.min()
    return indices, p[offset], q[offset]


@dataclass(frozen=True)
class MixedModel(PointProcess):
    """Uniform-on-K points for pairs passing ``rule``, uniform-on-circle otherwise."""

    radii: RadiiFamily
    rule: str = "triadic"
    name = "mixed"
    iid = True

    def sample(self, indices, stream):
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            return np.zeros(0)
        _, p, q = _pairs_for(self.radii, indices)
        on_cantor = in_enumerated_cantor(p, q, self.rule)
        circle = IidUniformCircle().sample(indices, derive_stream(stream, "mixed-circle", 0))
        cantor = IidUniformCantor().sample(indices, derive_stream(stream, "mixed-cantor", 0))
        return np.where(on_cantor, cantor, circle)

    def sample_point(self, n, stream):
        _, p, q = self.radii.pairs(n, n)
        if in_enumerated_cantor(p, q, self.rule)[0]:
            return IidUniformCantor().sample_point(n, derive_stream(stream, "mixed-cantor", 0))
        return IidUniformCircle().sample_point(n, derive_stream(stream, "mixed-circle", 0))


def sample_point(proc: PointProcess, n: int, stream: RandomStream) -> CirclePoint:
    if n < 1:
        raise ValueError("point indices start at 1")
    return proc.sample_point(n, stream)


# ----------------- GRIDS AND THETA ----------------- #

@dataclass(frozen=True)
class GridLevel:
    n: int
    mode: str
    q: int


def grid_level(r: RadiiFamily, n: int, mode: str = "ceiling") -> GridLevel:
    if mode not in ("floor", "ceiling"):
        raise ValueError("grid mode is floor or ceiling")
    if r.kind == "enumeration":
        q = int(r.denominators([n])[0])
    elif r.kind == "power" and float(r.decay).is_integer():
        q = n ** int(r.decay)
    else:
        inverse = 1.0 / r.radius(n)
        q = math.floor(inverse) if mode == "floor" else math.ceil(inverse)
    return GridLevel(n, mode, max(1, q))


@dataclass(frozen=True)
class ThetaEstimate:
    ratio: float
    ci_low: float
    ci_high: float
    trials: int
    hits: int


def theta_hits(proc, grid: np.ndarray, k_path: Sequence[int], first_trial: int, last_trial: int,
               stream: RandomStream) -> int:
    """Trials t in [first_trial, last_trial) whose points all land in their path cells."""
    indices = np.arange(1, len(k_path) + 1)
    target = np.asarray(k_path, dtype=np.int64)
    hits = 0
    for trial in range(first_trial, last_trial):
        cells = proc.cells(indices, grid, derive_stream(stream, "trial", trial))
        hits += bool(np.all(cells == target))
    return hits


def empirical_theta(proc, r: RadiiFamily, k_path: Sequence[int], v: int, trials: int,
                    stream: RandomStream, mode: str = "ceiling", hits: Optional[int] = None) -> ThetaEstimate:
    """Joint cell probability over the product of cell probabilities, with a 99% Wilson interval."""
    if not 1 <= v <= 6 or len(k_path) != v:
        raise ValueError("theta is estimated for 1 <= v <= 6 with one cell index per point")
    grid = np.array([grid_level(r, n, mode).q for n in range(1, v + 1)], dtype=np.int64)
    if hits is None:
        hits = theta_hits(proc, grid, k_path, 0, trials, stream)
    scale = float(np.prod(grid.astype(np.float64)))
    z = stats.norm.ppf(0.995)
    share = hits / trials
    centre = (share + z * z / (2 * trials)) / (1 + z * z / trials)
    spread = z * math.sqrt(share * (1 - share) / trials + z * z / (4 * trials * trials)) / (1 + z * z / trials)
    return ThetaEstimate(share * scale, max(0.0, centre - spread) * scale, (centre + spread) * scale, trials, hits)


@dataclass(frozen=True)
class HitCellReport:
    cardinality: int
    bound_low: float
    bound_high: float
    q: int


def count_hit_cells(target: Target, q: int) -> int:
    """#{k : target meets [k/q, (k+1)/q)}."""
    if q < 1:
        raise ValueError("grid size must be positive")
    if target == "circle":
        return q
    if target == "cantor":
        count, k = 0, 0
        while k < q:
            successor = cantor_successor(Fraction(k, q))
            if successor < Fraction(k + 1, q):
                count += 1
                k += 1
            else:
                k = math.floor(successor * q)
        return count
    ranges = []
    for a, b in target.components:
        ranges.append((math.floor(a * q), math.ceil(b * q) - 1))
    count, reach = 0, -1
    for lo, hi in sorted(ranges):
        lo = max(lo, reach + 1)
        if hi >= lo:
            count += hi - lo + 1
            reach = hi
    return count


def hit_cells(target: Target, r: RadiiFamily, n: int, mode: str = "ceiling") -> HitCellReport:
    """Cells of the level-n grid meeting the target, with the measured envelopes C/g(r_n)."""
    level = grid_level(r, n, mode)
    gauge = GaugeFn(KAPPA) if target == "cantor" else GaugeFn(1.0)
    weight = gauge(r.radius(n))
    return HitCellReport(
        count_hit_cells(target, level.q), HIT_ENVELOPE_LOW / weight, HIT_ENVELOPE_HIGH / weight, level.q
    )


# ----------------- SCALE CENSUSES ----------------- #

@dataclass(frozen=True)
class ScaleCensus:
    level: int
    window: Tuple[int, int]
    count: int
    exact_expectation: Optional[float] = None

    @property
    def window_size(self) -> int:
        return max(0, self.window[1] - self.window[0] + 1)


def target_cells(target: Target, level: int) -> np.ndarray:
    if level > MAX_CENSUS_LEVEL:
        raise PrecisionBudgetError(f"censuses are limited to level {MAX_CENSUS_LEVEL}")
    if target == "cantor":
        return level_cover_indices(level)
    if target == "circle":
        return np.arange(3 ** level, dtype=np.int64)
    width = 3 ** level
    return np.array(
        [k for k in range(width) if _cell_meets(target, k, width)],
        dtype=np.int64,
    )


def _cell_meets(union: IntervalUnion, k: int, width: int) -> bool:
    lo, hi = Fraction(k, width), Fraction(k + 1, width)
    return any(a < hi and b > lo for a, b in union.components)


def covered_cells(points: np.ndarray, radii: np.ndarray, level: int) -> np.ndarray:
    """Boolean mask of level cells meeting at least one open arc (x - r, x + r)."""
    n_cells = 3 ** level
    if points.size == 0:
        return np.zeros(n_cells, dtype=bool)
    if np.any(radii > 0.5):
        return np.ones(n_cells, dtype=bool)
    lo = np.floor((points - radii) * n_cells).astype(np.int64)
    hi = np.ceil((points + radii) * n_cells).astype(np.int64) - 1
    if np.any(hi - lo + 1 >= n_cells):
        return np.ones(n_cells, dtype=bool)
    start = lo % n_cells
    end = start + (hi - lo + 1)
    diff = np.zeros(n_cells + 1, dtype=np.int64)
    inside = end <= n_cells
    np.add.at(diff, start[inside], 1)
    np.add.at(diff, end[inside], -1)
    wrapped = ~inside
    np.add.at(diff, start[wrapped], 1)
    diff[n_cells] -= int(wrapped.sum())
    diff[0] += int(wrapped.sum())
    np.add.at(diff, end[wrapped] - n_cells, -1)
    return np.cumsum(diff[:n_cells]) > 0


def _window_arcs(proc, r: RadiiFamily, nu: float, level: int, stream: RandomStream):
    lo, hi = r.window(level, nu)
    if hi < lo:
        return (lo, hi), np.zeros(0), np.zeros(0)
    indices = np.arange(lo, hi + 1, dtype=np.int64)
    return (lo, hi), proc.sample(indices, stream), r.radii(indices) ** nu


def hit_target_cells(proc, r: RadiiFamily, nu: float, target: Target, level: int,
                     stream: RandomStream) -> Tuple[Tuple[int, int], np.ndarray]:
    window, points, radii = _window_arcs(proc, r, nu, level, stream)
    cells = target_cells(target, level)
    if points.size == 0:
        return window, cells[:0]
    return window, cells[covered_cells(points, radii, level)[cells]]


def single_scale_census(proc, r: RadiiFamily, nu: float, target: Target, level: int,
                        stream: RandomStream) -> ScaleCensus:
    if isinstance(proc, (IidUniformCantor, MixedModel)) and level + 2 > CANTOR_DIGITS:
        raise PrecisionBudgetError(f"Cantor points carry {CANTOR_DIGITS} digits, level {level} needs {level + 2}")
    window, hits = hit_target_cells(proc, r, nu, target, level, stream)
    return ScaleCensus(level, window, int(hits.size))


def exact_expected_census(proc, r: RadiiFamily, nu: float, target: Target, level: int) -> float:
    """Expected number of target cells met by the window's arcs, for i.i.d. uniform processes."""
    if not isinstance(proc, (IidUniformCircle, IidUniformCantor)):
        raise ValueError("closed-form expectations exist only for i.i.d. uniform processes")
    lo, hi = r.window(level, nu)
    cells = target_cells(target, level)
    if hi < lo:
        return 0.0
    radii = r.radii(np.arange(lo, hi + 1)) ** nu
    width = 3.0 ** -level
    with np.errstate(divide="ignore"):
        if isinstance(proc, IidUniformCircle):
            chances = np.minimum(1.0, 2 * radii + width)
            miss = math.fsum(np.log1p(-chances))
            return float(cells.size * -math.expm1(miss))
        total_miss = np.zeros(cells.size)
        left = cells.astype(np.float64) * width
        for start in range(0, radii.size, 256):
            chunk = radii[start : start + 256]
            chances = cantor_arc_measure(left[:, None] - chunk[None, :], left[:, None] + width + chunk[None, :])
            chances = np.where(chunk[None, :] > 0.5, 1.0, chances)
            total_miss += np.log1p(-np.minimum(chances, 1.0)).sum(axis=1)
    return float(np.sum(-np.expm1(total_miss)))


def nested_hit_depth(proc, r: RadiiFamily, nu: float, target: Target, first_level: int, last_level: int,
                     stream: RandomStream) -> int:
    """Deepest level reached by a chain of hit cells, one per level from ``first_level`` down."""
    if first_level > last_level:
        raise ValueError("first_level must not exceed last_level")
    survivors = None
    for level in range(first_level, last_level + 1):
        _, hits = hit_target_cells(proc, r, nu, target, level, stream)
        if survivors is not None:
            hits = hits[np.isin(hits // 3, survivors)]
        if hits.size == 0:
            return level - 1
        survivors = hits
    return last_level


def coverage_fraction(proc, r: RadiiFamily, nu: float, target: Target, level: int, N: int,
                      stream: RandomStream) -> float:
    cells = target_cells(target, level)
    if N <= 0:
        return 0.0
    covered = np.zeros(3 ** level, dtype=bool)
    for start in range(1, N + 1, COVERAGE_CHUNK):
        indices = np.arange(start, min(N, start + COVERAGE_CHUNK - 1) + 1, dtype=np.int64)
        covered |= covered_cells(proc.sample(indices, stream), r.radii(indices) ** nu, level)
    return float(covered[cells].mean())


# ----------------- FITS AND TARGETS ----------------- #

@dataclass(frozen=True)
class DimensionFit:
    slope: float
    stderr: float
    dropped: Tuple[int, ...]


def dimension_fit(censuses: Sequence[ScaleCensus]) -> DimensionFit:
    """Least-squares slope of log3(count) against level; zero counts are dropped."""
    usable = [c for c in censuses if c.count > 0]
    dropped = tuple(c.level for c in censuses if c.count <= 0)
    if len(usable) < 3:
        raise EstimationError("a dimension fit needs at least three levels with hits")
    levels = np.array([c.level for c in usable], dtype=np.float64)
    logs = np.log(np.array([c.count for c in usable], dtype=np.float64)) / LOG3
    fit = stats.linregress(levels, logs)
    return DimensionFit(float(fit.slope), float(fit.stderr), dropped)


def random_model_targets(nu: float, rho: float, gamma: float) -> dict:
    """Hit rules and dimensions for uniform-on-circle and uniform-on-G points."""
    circle_dimension = rho / nu + gamma - 1 if rho <= nu <= rho / (1 - gamma) else -math.inf
    if nu < rho:
        circle_dimension = gamma
    if (1 - gamma) * nu < rho:
        circle_hit = 1.0
    elif (1 - gamma) * nu > rho:
        circle_hit = 0.0
    else:
        circle_hit = math.nan
    on_g_dimension = gamma if gamma * nu < rho else rho / nu
    return {"circle_hit": circle_hit, "circle_dimension": circle_dimension, "on_g_dimension": on_g_dimension}


def fractional_parts_dimension(nu: float, gamma: float) -> float:
    if nu <= 1:
        return gamma
    if nu <= 1 / (1 - gamma):
        return 1 / nu + gamma - 1
    return -math.inf


def mixed_model_target(mu: float, sigma: float = KAPPA) -> float:
    return max(2 / mu + KAPPA - 1, sigma / mu)


def _scale_rows(experiment: str, proc, r: RadiiFamily, nu: float, levels: Sequence[int], trials: Iterable[int],
                stream: RandomStream, seed: int, target: Target = "cantor",
                expectations: Optional[dict] = None) -> List[dict]:
    rows = []
    for trial in trials:
        trial_stream = derive_stream(stream, "trial", trial)
        for level in levels:
            census = single_scale_census(proc, r, nu, target, level, trial_stream)
            rows.append(
                {
                    "experiment": experiment,
                    "kind": proc.name,
                    "nu_or_mu": nu,
                    "L": level,
                    "window_size": census.window_size,
                    "count": census.count,
                    "exact_expectation": (expectations or {}).get(level, math.nan),
                    "trial": trial,
                    "seed": seed,
                }
            )
    return rows


def expected_censuses(proc, r: RadiiFamily, nu: float, target: Target, levels: Sequence[int]) -> dict:
    if not isinstance(proc, (IidUniformCircle, IidUniformCantor)):
        return {}
    return {level: exact_expected_census(proc, r, nu, target, level) for level in levels}


def scale_census_rows(proc, r: RadiiFamily, nu: float, target: Target, levels: Sequence[int],
                      trials: Iterable[int], stream: RandomStream, seed: int,
                      expectations: Optional[dict] = None) -> List[dict]:
    """Per-trial census rows with the closed-form expectation where one exists."""
    if expectations is None:
        expectations = expected_censuses(proc, r, nu, target, levels)
    return _scale_rows("scale_census", proc, r, nu, levels, trials, stream, seed, target, expectations)


def slope_summary(rows: pd.DataFrame, target_of) -> pd.DataFrame:
    """Dimension fit of the per-level mean counts for every nu (or mu) in ``rows``."""
    summary = []
    for nu, group in rows.groupby("nu_or_mu", sort=True):
        means = group.groupby("L")["count"].mean()
        censuses = [ScaleCensus(int(level), (0, -1), int(round(count))) for level, count in means.items()]
        try:
            fit = dimension_fit(censuses)
            slope, stderr = fit.slope, fit.stderr
        except EstimationError:
            slope, stderr = math.nan, math.nan
        summary.append({"nu_or_mu": nu, "slope": slope, "stderr": stderr, "target": target_of(nu)})
    return pd.DataFrame(summary)


def mixed_model_target_for(rule: str):
    def target(mu):
        if rule == "none":
            return max(0.0, 2 / mu + KAPPA - 1)
        return mixed_model_target(mu)

    return target


def mixed_model_rows(rule: str, mu: float, levels: Sequence[int], trials: Iterable[int],
                     stream: RandomStream, seed: int = 0) -> List[dict]:
    radii = RadiiFamily.over("P")
    mu_stream = derive_stream(stream, "mu", int(round(float(mu) * 1000)))
    return _scale_rows("mixed_model", MixedModel(radii, rule), radii, float(mu), levels, trials, mu_stream, seed)


def mixed_model_experiment(rule: str, mu_list: Sequence[float], levels: Sequence[int], trials: int,
                           stream: RandomStream, seed: int = 0) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Censuses with radii q_n^-mu over all reduced fractions; Cantor-filtered pairs get points on K."""
    rows = []
    for mu in mu_list:
        rows += mixed_model_rows(rule, mu, levels, range(trials), stream, seed)
    frame = pd.DataFrame(rows)
    return frame, slope_summary(frame, mixed_model_target_for(rule))


def vb_model_rows(b: int, v: float, levels: Sequence[int], trials: Iterable[int],
                  stream: RandomStream, seed: int = 0) -> List[dict]:
    # K_b lists every reduced k/b^j; the "exact" rule puts the ones lying in K on K
    radii = RadiiFamily.over("K_b", base=b)
    return _scale_rows("vb_model", MixedModel(radii, "exact"), radii, v + 1, levels, trials, stream, seed)


def vb_random_model(b: int, v: float, levels: Sequence[int], trials: int,
                    stream: RandomStream, seed: int = 0) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Base-b model: points on K when k/b^j is in K, on the circle otherwise, radius b^-(v+1)j."""
    frame = pd.DataFrame(vb_model_rows(b, v, levels, range(trials), stream, seed))
    return frame, slope_summary(frame, lambda nu: conjectured_vb_dimension(b, nu - 1))


def deterministic_distance_report(kind: str, count: int) -> Tuple[pd.DataFrame, float]:
    """Distances to K along the triadic lists, with the fitted log-distance/log-n slope."""
    if kind not in ("triadic_cantor", "shifted_triadic"):
        raise ValueError(f"unknown deterministic list {kind!r}")
    points = DeterministicList.triadic(count, shifted=kind == "shifted_triadic").points
    rows = [
        {"n": n, "x": float(x), "distance": float(distance_to_cantor(reduce_to_circle(x).value))}
        for n, x in enumerate(points, start=1)
    ]
    frame = pd.DataFrame(rows)
    positive = frame[frame["distance"] > 0]
    if len(positive) < 3:
        return frame, math.nan
    fit = stats.linregress(np.log(positive["n"].to_numpy(float)), np.log(positive["distance"].to_numpy()))
    return frame, float(fit.slope)


def parse_process(text: str, radii: RadiiFamily, max_index: int = 64, count: int = 1024) -> PointProcess:
    """``iid_circle``, ``iid_cantor``, ``fractional:<sequence>``, ``rotated[:alpha]``,
    ``mixed:<rule>`` or ``deterministic:<list>``."""
    kind, _, rest = text.strip().partition(":")
    if kind == "iid_circle":
        return IidUniformCircle()
    if kind == "iid_cantor":
        return IidUniformCantor()
    if kind == "fractional":
        return FractionalParts(IntegerSequence.parse(rest or "exp2_square"), max_index)
    if kind == "rotated":
        return RotatedRationals(radii, Fraction(rest) if rest else None)
    if kind == "mixed":
        return MixedModel(radii, rest or "triadic")
    if kind == "deterministic":
        if rest not in ("triadic_cantor", "shifted_triadic"):
            raise ValueError(f"unknown deterministic list {rest!r}")
        return DeterministicList.triadic(count, shifted=rest == "shifted_triadic")
    raise ValueError(f"unknown point process {text!r}")
