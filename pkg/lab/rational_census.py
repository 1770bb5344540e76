"""
Exact censuses of reduced fractions p/q near the Cantor set.

A census runs over the coprime pairs with 3**j <= q < 3**(j+1). The unit of
work is a single denominator q, so the harness can shard, checkpoint and
resume a census without changing its result.

Two counting algorithms are provided and must agree exactly:

* ``scan`` visits every coprime numerator and runs a ternary descent with
  early exit;
* ``walk`` descends the construction cells of K once per q, prunes cells whose
  fattened span holds no grid point, and counts coprime numerators inside
  each surviving leaf with Moebius inclusion-exclusion.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
import pandas as pd
from scipy import stats

from lab.cantor_geometry import removed_gap
from lab.errors import EstimationError
from lab.foundations import KAPPA, LOG3

logger = logging.getLogger(__name__)

MuValue = Union[Fraction, float]

MU_STAR = (2 - KAPPA) / (1 - KAPPA)
DYADIC_EXPONENT_BITS = 20
EXACT_POWER_LIMIT = 256
LOG_DECISION_MARGIN = 1e-9

ALGORITHMS = ("scan", "walk")


# ----------------- EXPONENTS AND THRESHOLDS ----------------- #

def parse_mu(text) -> MuValue:
    """Read an approximation exponent: a decimal, a fraction, ``inf`` or ``mu_star``."""
    if isinstance(text, (Fraction, int)):
        return Fraction(text)
    if isinstance(text, float):
        return text
    token = str(text).strip().lower()
    if token in ("inf", "+inf", "infinity"):
        return math.inf
    if token in ("mu_star", "mu*"):
        return MU_STAR
    return Fraction(token)


def format_mu(mu: MuValue) -> str:
    if mu == math.inf:
        return "inf"
    if isinstance(mu, Fraction):
        if mu.denominator == 1:
            return str(mu.numerator)
        denominator = mu.denominator
        for prime in (2, 5):
            while denominator % prime == 0:
                denominator //= prime
        return f"{float(mu):g}" if denominator == 1 else str(mu)
    return f"{mu:.17g}"


def conjecture_bound(mu: MuValue) -> float:
    if mu == math.inf:
        return KAPPA
    return max(2 - (1 - KAPPA) * float(mu), KAPPA)


def weak_variant_target(mu: MuValue, sigma: float = KAPPA) -> float:
    """max{2/mu + kappa - 1, sigma/mu}, the weaker count target with kappa <= sigma < 2 kappa."""
    if not KAPPA <= sigma < 2 * KAPPA:
        raise ValueError("sigma must satisfy kappa <= sigma < 2 kappa")
    if mu == math.inf:
        return 0.0
    if float(mu) <= 0:
        return math.nan
    return max(2 / float(mu) + KAPPA - 1, sigma / float(mu))


def mu_regime(mu: MuValue) -> str:
    value = float(mu)
    if math.isclose(value, MU_STAR, rel_tol=1e-12):
        return "critical"
    return "below" if value < MU_STAR else "above"


@dataclass(frozen=True)
class Threshold:
    """Distance threshold 3**-exponent; ``exponent=None`` means exact membership."""

    exponent: Optional[Fraction]
    rounding: str = "exact"

    @classmethod
    def for_level(cls, j: int, mu: MuValue) -> "Threshold":
        if mu == math.inf:
            return cls(None)
        if float(mu) < 0:
            raise ValueError("mu must be nonnegative")
        if isinstance(mu, Fraction):
            return cls(mu * j)
        scale = 1 << DYADIC_EXPONENT_BITS
        return cls(Fraction(math.ceil(mu * j * scale), scale), f"ceil-2^-{DYADIC_EXPONENT_BITS}")

    @cached_property
    def tau(self) -> float:
        if self.exponent is None:
            return 0.0
        return 3.0 ** -float(self.exponent)

    def admits(self, distance: Fraction) -> bool:
        """distance < 3**-exponent, decided exactly."""
        if self.exponent is None:
            return distance == 0
        if distance <= 0:
            return True
        exponent = self.exponent
        if exponent.denominator == 1:
            return distance.numerator * 3 ** exponent.numerator < distance.denominator
        margin = math.log(distance.numerator) - math.log(distance.denominator) + float(exponent) * LOG3
        if margin < -LOG_DECISION_MARGIN:
            return True
        if margin > LOG_DECISION_MARGIN:
            return False
        return self._admits_exactly(distance)

    def _admits_exactly(self, distance: Fraction) -> bool:
        a, b = self.exponent.numerator, self.exponent.denominator
        if b <= EXACT_POWER_LIMIT:
            return distance.numerator ** b * 3 ** a < distance.denominator ** b
        with mpmath.workprec(512):
            lhs = mpmath.log(distance.numerator) - mpmath.log(distance.denominator)
            return lhs + mpmath.mpf(a) / b * mpmath.log(3) < 0

    @cached_property
    def cell_exit_level(self) -> int:
        """First level whose cells lie entirely inside the neighbourhood (1/6 * 3**-level < tau)."""
        if self.exponent is None:
            raise ValueError("membership thresholds have no exit level")
        level = max(0, math.floor(float(self.exponent) - 3))
        while not self.admits(Fraction(1, 6 * 3 ** level)):
            level += 1
        while level > 0 and self.admits(Fraction(1, 6 * 3 ** (level - 1))):
            level -= 1
        return level

    @cached_property
    def leaf_level(self) -> int:
        """Smallest m with every gap below level m shorter than 2 * tau."""
        if self.exponent is None:
            raise ValueError("membership thresholds have no leaf level")
        return max(0, math.floor(float(self.exponent) - 1 - KAPPA) + 1)


# ----------------- SIEVES ----------------- #

@lru_cache(maxsize=8)
def smallest_prime_factors(limit: int) -> np.ndarray:
    spf = np.zeros(limit + 1, dtype=np.int64)
    for n in range(2, math.isqrt(limit) + 1):
        if spf[n] == 0:
            block = spf[n * n :: n]
            block[block == 0] = n
            spf[n] = n
    unset = spf == 0
    spf[unset] = np.arange(limit + 1)[unset]
    return spf


@lru_cache(maxsize=8)
def totient_sieve(limit: int) -> np.ndarray:
    phi = np.arange(limit + 1, dtype=np.int64)
    spf = smallest_prime_factors(limit)
    for p in np.nonzero((spf == np.arange(limit + 1)) & (np.arange(limit + 1) >= 2))[0]:
        phi[p::p] -= phi[p::p] // p
    return phi


def prime_factors(q: int) -> List[int]:
    primes = []
    p = 2
    while p * p <= q:
        if q % p == 0:
            primes.append(p)
            while q % p == 0:
                q //= p
        p += 1 if p == 2 else 2
    if q > 1:
        primes.append(q)
    return primes


def mobius_divisors(q: int) -> List[Tuple[int, int]]:
    """Squarefree divisors d of q with their Moebius signs."""
    divisors = [(1, 1)]
    for p in prime_factors(q):
        divisors += [(d * p, -sign) for d, sign in divisors]
    return divisors


def coprime_count_upto(n: int, divisors: Sequence[Tuple[int, int]]) -> int:
    """#{0 <= p <= n : gcd(p, q) = 1} for the q that produced ``divisors``."""
    if n < 0:
        return 0
    return sum(sign * (n // d + 1) for d, sign in divisors)


# ----------------- PAIRS ----------------- #

@dataclass(frozen=True)
class PairRange:
    j: int

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("level must be nonnegative")

    @property
    def q_low(self) -> int:
        return 3 ** self.j

    @property
    def q_high(self) -> int:
        return 3 ** (self.j + 1) - 1

    def denominators(self) -> range:
        return range(self.q_low, self.q_high + 1)

    def pairs(self) -> Iterator[Tuple[int, int]]:
        for q in self.denominators():
            for p in range(q):
                if math.gcd(p, q) == 1:
                    yield p, q


def totient_count(j: int) -> int:
    pairs = PairRange(j)
    return int(totient_sieve(pairs.q_high)[pairs.q_low :].sum())


# ----------------- PER-DENOMINATOR KERNELS ----------------- #

def pair_within(p: int, q: int, threshold: Threshold) -> bool:
    """d(p/q, K) < threshold, by ternary descent with early exit."""
    if threshold.exponent is None:
        return removed_gap(p, q) is None
    exit_level = threshold.cell_exit_level
    state, level = p, 0
    seen = set()
    while True:
        if state == 0 or state == q or state in seen or level >= exit_level:
            return True
        seen.add(state)
        tripled = 3 * state
        if tripled < q:
            state = tripled
        elif tripled > 2 * q:
            state = tripled - 2 * q
        elif tripled == q or tripled == 2 * q:
            return True
        else:
            distance = Fraction(min(tripled - q, 2 * q - tripled), q * 3 ** (level + 1))
            return threshold.admits(distance)
        level += 1


def _scan_denominator(q: int, threshold: Threshold) -> int:
    return sum(1 for p in range(q) if math.gcd(p, q) == 1 and pair_within(p, q, threshold))


def _left_index(q: int, num: int, den: int, threshold: Threshold) -> int:
    """Smallest p >= 0 with p/q > num/den - tau."""
    base = -((-q * num) // den)
    if base <= 0:
        return 0
    left = Fraction(num, den)
    guess = min(base, max(0, math.floor(q * (num / den - threshold.tau))))
    while guess < base and not threshold.admits(left - Fraction(guess, q)):
        guess += 1
    while guess > 0 and threshold.admits(left - Fraction(guess - 1, q)):
        guess -= 1
    return guess


def _right_index(q: int, num: int, den: int, threshold: Threshold) -> int:
    """Largest p <= q - 1 with p/q < num/den + tau."""
    base = (q * num) // den
    if base >= q - 1:
        return q - 1
    right = Fraction(num, den)
    guess = max(base, min(q - 1, math.floor(q * (num / den + threshold.tau))))
    while guess > base and not threshold.admits(Fraction(guess, q) - right):
        guess -= 1
    while guess < q - 1 and threshold.admits(Fraction(guess + 1, q) - right):
        guess += 1
    return guess


def _walk_denominator(q: int, threshold: Threshold) -> int:
    membership = threshold.exponent is None
    if membership:
        leaf = 0
        while 3 ** leaf <= q:
            leaf += 1
    else:
        leaf = threshold.leaf_level
        divisors = mobius_divisors(q)
    total = 0
    stack = [(0, 0)]
    while stack:
        level, cell = stack.pop()
        width = 3 ** level
        if membership:
            lo = -((-q * cell) // width)
            hi = min(q - 1, (q * (cell + 1)) // width)
        else:
            lo = _left_index(q, cell, width, threshold)
            hi = _right_index(q, cell + 1, width, threshold)
        if lo > hi:
            continue
        if level < leaf:
            stack.append((level + 1, 3 * cell + 2))
            stack.append((level + 1, 3 * cell))
        elif membership:
            total += sum(1 for p in range(lo, hi + 1) if math.gcd(p, q) == 1 and removed_gap(p, q) is None)
        else:
            total += coprime_count_upto(hi, divisors) - coprime_count_upto(lo - 1, divisors)
    return total


def count_denominator(q: int, threshold: Threshold, algorithm: str = "walk") -> int:
    """Number of coprime p in [0, q) with d(p/q, K) below ``threshold``."""
    if algorithm == "scan":
        return _scan_denominator(q, threshold)
    if algorithm == "walk":
        return _walk_denominator(q, threshold)
    raise ValueError(f"unknown census algorithm {algorithm!r}")


# ----------------- CENSUS RECORDS ----------------- #

@dataclass(frozen=True)
class CensusRecord:
    j: int
    mu: MuValue
    count: int
    algorithm: str
    rounding: str = "exact"

    @property
    def mu_label(self) -> str:
        return format_mu(self.mu)

    @property
    def log3_density(self) -> float:
        if self.count == 0:
            return -math.inf
        return math.log(self.count) / (self.j * LOG3)

    @property
    def bound(self) -> float:
        return conjecture_bound(self.mu)


def _census(j: int, mu: MuValue, algorithm: str) -> CensusRecord:
    if j < 1:
        raise ValueError("census level must be at least 1")
    threshold = Threshold.for_level(j, mu)
    count = sum(count_denominator(q, threshold, algorithm) for q in PairRange(j).denominators())
    return CensusRecord(j, mu, count, algorithm, threshold.rounding)


def exact_in_K_count(j: int) -> int:
    return _census(j, math.inf, "walk").count


def near_K_count(j: int, mu) -> CensusRecord:
    return _census(j, parse_mu(mu), "scan")


def near_K_count_fast(j: int, mu) -> CensusRecord:
    return _census(j, parse_mu(mu), "walk")


@dataclass(frozen=True)
class SigmaReport:
    mu: MuValue
    levels: Tuple[int, ...]
    values: Tuple[float, ...]
    tail_max: Tuple[float, ...]


def sigma_estimate(records: Sequence[CensusRecord]) -> SigmaReport:
    if not records:
        raise EstimationError("sigma estimate needs at least one census record")
    ordered = sorted(records, key=lambda record: record.j)
    if len({format_mu(record.mu) for record in ordered}) != 1:
        raise ValueError("records must share the same mu")
    levels = [record.j for record in ordered]
    if levels != list(range(levels[0], levels[0] + len(levels))):
        raise ValueError("records must cover consecutive levels")
    values = [record.log3_density for record in ordered]
    tail = list(values)
    for i in range(len(tail) - 2, -1, -1):
        tail[i] = max(tail[i], tail[i + 1])
    return SigmaReport(ordered[0].mu, tuple(levels), tuple(values), tuple(tail))


def fitted_exponent(records: Sequence[CensusRecord]) -> Tuple[float, float]:
    """Least-squares slope of log3(count) against j, with its standard error."""
    usable = [record for record in records if record.count > 0]
    if len(usable) < 2:
        raise EstimationError("a fitted exponent needs two levels with nonzero counts")
    levels = np.array([record.j for record in usable], dtype=np.float64)
    logs = np.array([math.log(record.count) / LOG3 for record in usable])
    if len(usable) == 2:
        return float((logs[1] - logs[0]) / (levels[1] - levels[0])), math.nan
    fit = stats.linregress(levels, logs)
    return float(fit.slope), float(fit.stderr)


def base_b_count(b: int, j: int) -> int:
    if b < 2 or j < 1:
        raise ValueError("base_b_count needs b >= 2 and j >= 1")
    modulus = b ** j
    radical = math.prod(prime_factors(b))
    return sum(
        1 for k in range(modulus) if math.gcd(k, radical) == 1 and removed_gap(k, modulus) is None
    )


def census_rows(records: Sequence[CensusRecord], membership: Optional[dict] = None) -> pd.DataFrame:
    """Tabulate census records with the conjectured bound and the regime of mu."""
    rows = []
    for record in records:
        exact = membership.get(record.j) if membership else None
        rows.append(
            {
                "j": record.j,
                "mu": record.mu_label,
                "count": record.count,
                "log3_density": record.log3_density,
                "bound": record.bound,
                "weak_target": weak_variant_target(record.mu),
                "exact_density": exact.log3_density if exact else math.nan,
                "mu_regime": mu_regime(record.mu) if record.mu != math.inf else "membership",
                "rounding": record.rounding,
                "algorithm": record.algorithm,
            }
        )
    return pd.DataFrame(rows)


def conjecture_report(j_range: Sequence[int], mu_list: Sequence, algorithm: str = "walk") -> pd.DataFrame:
    """Counts and densities for every (j, mu) against max{2 - (1 - kappa) mu, kappa}.

    The exact-membership density of each level is tabulated beside every row;
    rows for mu = mu_star are labelled ``critical``.
    """
    mus = [parse_mu(mu) for mu in mu_list]
    membership = {j: _census(j, math.inf, algorithm) for j in j_range}
    records = [_census(j, mu, algorithm) for mu in mus for j in j_range]
    logger.info("Conjecture report over j=%s and %d exponents", list(j_range), len(mus))
    return census_rows(records, membership)


def reference_dimensions(mu: MuValue) -> dict:
    """Known dimension landmarks for the mu-approximable reals."""
    value = float(mu)
    if value <= 0:
        raise ValueError("mu must be positive")
    return {
        "full_line": min(1.0, 2 / value),
        "cantor_lower": KAPPA / value,
        "cantor_upper": min(KAPPA, 2 * KAPPA / value),
    }
