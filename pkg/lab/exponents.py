"""Continued fractions and finite-data estimators for approximation exponents."""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Sequence, Tuple, Union

import mpmath

from lab.errors import EstimationError
from lab.foundations import KAPPA, LOG3, as_rational

MAX_FLOOR_PRECISION = 1 << 16


@dataclass(frozen=True)
class ContinuedFraction:
    quotients: Tuple[int, ...]

    def value(self) -> Fraction:
        result = Fraction(self.quotients[-1])
        for quotient in reversed(self.quotients[:-1]):
            result = quotient + 1 / result
        return result


@dataclass(frozen=True)
class ApproxWitness:
    approximant: Fraction
    error_bound: Fraction
    denominator_size: int

    def __post_init__(self):
        if self.error_bound <= 0:
            raise ValueError("witness error bound must be positive")

    @property
    def log_ratio(self) -> float:
        return -_log(self.error_bound) / math.log(self.denominator_size)


@dataclass(frozen=True)
class ExponentEstimate:
    kind: str
    value: float
    witnesses: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)

    @property
    def scale_range(self) -> Tuple[float, float]:
        scales = [scale for scale, _ in self.witnesses]
        return (min(scales), max(scales)) if scales else (math.nan, math.nan)


def _log(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def continued_fraction(x) -> ContinuedFraction:
    x = as_rational(x)
    if x < 0:
        raise ValueError("continued fractions are computed for x >= 0")
    numerator, denominator = x.numerator, x.denominator
    quotients = []
    while denominator:
        quotient, remainder = divmod(numerator, denominator)
        quotients.append(quotient)
        numerator, denominator = denominator, remainder
    return ContinuedFraction(tuple(quotients))


def convergents(cf: ContinuedFraction) -> List[Fraction]:
    p_prev, p = 1, cf.quotients[0]
    q_prev, q = 0, 1
    result = [Fraction(p, q)]
    for quotient in cf.quotients[1:]:
        p_prev, p = p, quotient * p + p_prev
        q_prev, q = q, quotient * q + q_prev
        result.append(Fraction(p, q))
    return result


def floor_power(mu: Union[Fraction, int, float, "mpmath.mpf"], j: int) -> int:
    """Integer part of mu**j, exact for rationals, by raising the working precision otherwise."""
    if isinstance(mu, (int, Fraction)):
        return math.floor(Fraction(mu) ** j)
    precision = 64
    while precision <= MAX_FLOOR_PRECISION:
        with mpmath.workprec(precision):
            power = mpmath.mpf(mu) ** j
            slack = abs(power) * mpmath.mpf(2) ** (20 - precision)
            if abs(power - mpmath.nint(power)) > slack:
                return int(mpmath.floor(power))
        precision *= 2
    raise EstimationError(f"could not separate floor(mu**{j}) from an integer")


@dataclass(frozen=True)
class LsvSum:
    value: Fraction
    tail_bound: Fraction
    exponents: Tuple[int, ...]


def lsv_partial_sum(mu, J: int) -> LsvSum:
    """Partial sum of 2 * 3**-floor(mu**j) over j = 1..J, with its tail bound."""
    if J < 1:
        raise ValueError("J must be at least 1")
    if mu < 2:
        raise ValueError("the series needs mu >= 2")
    exponents = tuple(floor_power(mu, j) for j in range(1, J + 1))
    value = sum((Fraction(2, 3 ** e) for e in exponents), Fraction(0))
    tail = Fraction(3, 3 ** floor_power(mu, J + 1))
    return LsvSum(value, tail, exponents)


def lsv_witnesses(mu, J: int) -> List[ApproxWitness]:
    """Partial sums S_1..S_J as approximants of the full series."""
    witnesses = []
    for k in range(1, J + 1):
        partial = lsv_partial_sum(mu, k)
        witnesses.append(ApproxWitness(partial.value, partial.tail_bound, partial.value.denominator))
    return witnesses


def convergent_witnesses(x) -> List[ApproxWitness]:
    x = as_rational(x)
    witnesses = []
    for approximant in convergents(continued_fraction(x))[:-1]:
        if approximant.denominator > 1:
            witnesses.append(ApproxWitness(approximant, abs(x - approximant), approximant.denominator))
    return witnesses


def exponent_from_witnesses(ws: Sequence[ApproxWitness], kind: str = "irrationality") -> ExponentEstimate:
    if not ws:
        raise EstimationError("an exponent estimate needs at least one witness")
    points = tuple((math.log(w.denominator_size), w.log_ratio) for w in ws)
    return ExponentEstimate(kind, max(ratio for _, ratio in points), points)


@dataclass(frozen=True)
class VbProfile:
    base: int
    distances: Tuple[Fraction, ...]
    estimate: ExponentEstimate
    exact_hits: Tuple[int, ...]
    convention_value: float


def vb_profile(x, b: int, J: int) -> VbProfile:
    """Distances ||b^j x|| for j = 1..J and the base-b exponent they suggest.

    Log-ratios are taken against 2 * ||b^j x||, the distance normalised by its
    ceiling 1/2. Scales where b^j x is an integer have no finite ratio and are
    listed in ``exact_hits``. Rational inputs carry the convention value 0.
    """
    if b < 2 or J < 1:
        raise ValueError("vb_profile needs b >= 2 and J >= 1")
    x = as_rational(x)
    distances, points, hits = [], [], []
    for j in range(1, J + 1):
        scaled = x * b ** j
        frac = scaled - math.floor(scaled)
        distance = min(frac, 1 - frac)
        distances.append(distance)
        if distance == 0:
            hits.append(j)
            continue
        points.append((float(j), -_log(2 * distance) / (j * math.log(b))))
    value = max((ratio for _, ratio in points), default=0.0)
    estimate = ExponentEstimate("v_b", value, tuple(points))
    return VbProfile(b, tuple(distances), estimate, tuple(hits), 0.0)


def lsv_dimension_target(v: float) -> float:
    """Dimension of the base-3 v-approximable points inside K."""
    return KAPPA / (v + 1)


def conjectured_vb_dimension(b: int, v: float) -> float:
    """kappa/(v+1) when b is a power of 3, else 1/(v+1) + kappa - 1 clipped at 0."""
    power = round(math.log(b) / LOG3)
    if power >= 1 and 3 ** power == b:
        return KAPPA / (v + 1)
    return max(0.0, 1 / (v + 1) + KAPPA - 1)
