"""
Exact geometry of the middle-third Cantor set K on the circle.

All exact routines work on the numerator and denominator of a rational with
integer arithmetic only: the state of a ternary descent is the numerator of
3**level * x - cell_left, which always lies in [0, q]. A repeated state means
the expansion has entered its cycle.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Tuple

import numpy as np

from lab.foundations import KAPPA, CirclePoint, as_rational

Interval = Tuple[Fraction, Fraction]


def _as_unit_rational(x, allow_one: bool = False) -> Fraction:
    value = x.value if isinstance(x, CirclePoint) else as_rational(x)
    upper_ok = value <= 1 if allow_one else value < 1
    if not (0 <= value and upper_ok):
        raise ValueError(f"expected a rational in [0, 1{']' if allow_one else ')'}, got {value}")
    return value


# ----------------- EXPANSIONS ----------------- #

@dataclass(frozen=True)
class TernaryExpansion:
    preperiod: Tuple[int, ...]
    period: Tuple[int, ...]

    def value(self) -> Fraction:
        head = sum(Fraction(d, 3 ** (i + 1)) for i, d in enumerate(self.preperiod))
        cycle = sum(Fraction(d, 3 ** (i + 1)) for i, d in enumerate(self.period))
        cycle = cycle * Fraction(3 ** len(self.period), 3 ** len(self.period) - 1)
        return head + cycle / 3 ** len(self.preperiod)


def ternary_expansion(x) -> TernaryExpansion:
    x = _as_unit_rational(x)
    numerator, denominator = x.numerator, x.denominator
    digits: List[int] = []
    seen = {}
    remainder = numerator
    while remainder not in seen:
        seen[remainder] = len(digits)
        digit, remainder = divmod(3 * remainder, denominator)
        digits.append(digit)
    start = seen[remainder]
    return TernaryExpansion(tuple(digits[:start]), tuple(digits[start:]))


def removed_gap(p: int, q: int) -> Optional[Interval]:
    """The open removed interval of [0, 1] containing p/q, or None if p/q is in K."""
    if q <= 0 or not 0 <= p <= q:
        raise ValueError(f"expected 0 <= p <= q, got {p}/{q}")
    state, cell, level = p, 0, 0
    seen = set()
    while True:
        if state == 0 or state == q or state in seen:
            return None
        seen.add(state)
        tripled = 3 * state
        if tripled < q:
            state, cell = tripled, 3 * cell
        elif tripled > 2 * q:
            state, cell = tripled - 2 * q, 3 * cell + 2
        elif tripled == q or tripled == 2 * q:
            return None
        else:
            width = 3 ** (level + 1)
            return Fraction(3 * cell + 1, width), Fraction(3 * cell + 2, width)
        level += 1


def in_cantor(x) -> bool:
    """Membership in K under the two-expansion rule (gap endpoints belong to K)."""
    x = _as_unit_rational(x, allow_one=True)
    return removed_gap(x.numerator, x.denominator) is None


def distance_to_cantor(x) -> Fraction:
    x = _as_unit_rational(x, allow_one=True)
    gap = removed_gap(x.numerator, x.denominator)
    if gap is None:
        return Fraction(0)
    left, right = gap
    return min(x - left, right - x)


def cantor_successor(x) -> Fraction:
    """Smallest point of K that is >= x."""
    x = _as_unit_rational(x, allow_one=True)
    gap = removed_gap(x.numerator, x.denominator)
    return x if gap is None else gap[1]


def cantor_cdf(x) -> Fraction:
    """Value of the Cantor function. Stops at the first ternary digit 1."""
    x = _as_unit_rational(x, allow_one=True)
    if x == 1:
        return Fraction(1)
    numerator, denominator = x.numerator, x.denominator
    bits: List[int] = []
    seen = {}
    remainder = numerator
    while remainder not in seen:
        seen[remainder] = len(bits)
        digit, remainder = divmod(3 * remainder, denominator)
        if digit == 1:
            return _binary_value(bits) + Fraction(1, 2 ** (len(bits) + 1))
        bits.append(digit // 2)
    start = seen[remainder]
    head, cycle = bits[:start], bits[start:]
    cycle_value = Fraction(_bits_to_int(cycle), 2 ** len(cycle) - 1)
    return (_bits_to_int(head) + cycle_value) / 2 ** len(head)


def _bits_to_int(bits: Iterable[int]) -> int:
    value = 0
    for bit in bits:
        value = 2 * value + bit
    return value


def _binary_value(bits: List[int]) -> Fraction:
    return Fraction(_bits_to_int(bits), 2 ** len(bits))


def cantor_cdf_array(xs, digits: int = 40) -> np.ndarray:
    """Float Cantor function on an array of points in [0, 1]."""
    y = np.clip(np.asarray(xs, dtype=np.float64), 0.0, 1.0)
    result = np.zeros_like(y)
    active = np.ones(y.shape, dtype=bool)
    scale = 0.5
    for _ in range(digits):
        tripled = 3.0 * y
        digit = np.minimum(np.floor(tripled), 2.0)
        hit_gap = active & (digit == 1.0)
        result[hit_gap] += scale
        active &= ~hit_gap
        result[active & (digit == 2.0)] += scale
        y = tripled - digit
        scale /= 2.0
    return result


# ----------------- INTERVALS ----------------- #

@dataclass(frozen=True)
class TriadicInterval:
    level: int
    index: int

    def __post_init__(self):
        if self.level < 0 or not 0 <= self.index < 3 ** self.level:
            raise ValueError(f"no triadic cell with level {self.level} and index {self.index}")

    @property
    def left(self) -> Fraction:
        return Fraction(self.index, 3 ** self.level)

    @property
    def right(self) -> Fraction:
        return Fraction(self.index + 1, 3 ** self.level)

    @property
    def center(self) -> Fraction:
        return Fraction(2 * self.index + 1, 2 * 3 ** self.level)

    @property
    def length(self) -> Fraction:
        return Fraction(1, 3 ** self.level)

    def parent(self) -> "TriadicInterval":
        if self.level == 0:
            raise ValueError("the level-0 cell has no parent")
        return TriadicInterval(self.level - 1, self.index // 3)


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted, pairwise disjoint half-open intervals [a, b) inside [0, 1)."""

    components: Tuple[Interval, ...] = ()

    @classmethod
    def whole(cls) -> "IntervalUnion":
        return cls(((Fraction(0), Fraction(1)),))

    @classmethod
    def from_arcs(cls, arcs: Iterable[Tuple[Fraction, Fraction]]) -> "IntervalUnion":
        """Project real intervals [a, b) onto the circle and merge them."""
        pieces: List[Interval] = []
        for a, b in arcs:
            a, b = as_rational(a), as_rational(b)
            if b <= a:
                continue
            if b - a >= 1:
                return cls.whole()
            start = a - math.floor(a)
            end = start + (b - a)
            if end <= 1:
                pieces.append((start, end))
            else:
                pieces.append((start, Fraction(1)))
                pieces.append((Fraction(0), end - 1))
        pieces.sort()
        merged: List[List[Fraction]] = []
        for a, b in pieces:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return cls(tuple((a, b) for a, b in merged))

    @property
    def length(self) -> Fraction:
        return sum((b - a for a, b in self.components), Fraction(0))

    def contains(self, x) -> bool:
        x = x.value if isinstance(x, CirclePoint) else as_rational(x)
        return any(a <= x < b for a, b in self.components)

    def is_empty(self) -> bool:
        return not self.components


def cantor_measure(union: IntervalUnion) -> Fraction:
    return sum((cantor_cdf(b) - cantor_cdf(a) for a, b in union.components), Fraction(0))


def level_cover_indices(j: int) -> np.ndarray:
    """Indices k of the 2**j level-j construction cells, increasing."""
    if j < 0:
        raise ValueError("level must be nonnegative")
    indices = np.zeros(1, dtype=np.int64)
    for _ in range(j):
        indices = np.stack([3 * indices, 3 * indices + 2], axis=1).ravel()
    return indices


def level_cover(j: int) -> List[TriadicInterval]:
    return [TriadicInterval(j, int(k)) for k in level_cover_indices(j)]


def neighborhood_cover(j: int, delta) -> IntervalUnion:
    delta = as_rational(delta)
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    width = Fraction(1, 3 ** j)
    return IntervalUnion.from_arcs(
        (int(k) * width - delta, (int(k) + 1) * width + delta) for k in level_cover_indices(j)
    )


def ahlfors_ratio(x, r) -> Tuple[Fraction, float]:
    """Cantor measure of the open arc B(x, r) and its ratio to r**kappa."""
    x = _as_unit_rational(x)
    r = as_rational(r)
    if not in_cantor(x):
        raise ValueError(f"{x} is not a point of K")
    if not 0 < r <= Fraction(1, 2):
        raise ValueError("radius must lie in (0, 1/2]")
    measure = cantor_measure(IntervalUnion.from_arcs([(x - r, x + r)]))
    return measure, float(measure) / float(r) ** KAPPA


def cantor_arc_measure(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Float Cantor measure of circle arcs (lo, hi) with hi - lo < 1, wrapping at 0."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    whole = hi - lo >= 1.0
    measure = cantor_cdf_array(np.clip(hi, 0.0, 1.0)) - cantor_cdf_array(np.clip(lo, 0.0, 1.0))
    below = lo < 0.0
    above = hi > 1.0
    measure = np.where(below, measure + 1.0 - cantor_cdf_array(np.clip(1.0 + lo, 0.0, 1.0)), measure)
    measure = np.where(above, measure + cantor_cdf_array(np.clip(hi - 1.0, 0.0, 1.0)), measure)
    return np.where(whole, 1.0, np.minimum(measure, 1.0))
