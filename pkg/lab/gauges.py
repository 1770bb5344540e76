"""
Symbolic gauge functions, radius families and the series criteria built on them.

A gauge is g(r) = c * r**s * (log∘p (1/r))**t on (0, r0] and constant beyond
r0, where r0 is the largest radius at which the log factor is at least 1 and
g is still nondecreasing. Pure powers have r0 = 1.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Optional, Tuple

import numpy as np

from lab.cantor_geometry import level_cover_indices
from lab.errors import GaugeError
from lab.foundations import KAPPA, LOG3
from lab.rational_census import totient_sieve

MAX_LOG_ORDER = 3
CLOSE = 1e-12


def _log_of(r) -> float:
    """log(1/r) without underflowing for tiny rationals."""
    if isinstance(r, (Fraction, int)):
        r = Fraction(r)
        if r <= 0:
            raise GaugeError(f"gauges are evaluated at r > 0, got {r}")
        return math.log(r.denominator) - math.log(r.numerator)
    if r <= 0:
        raise GaugeError(f"gauges are evaluated at r > 0, got {r}")
    return -math.log(r)


def _iterated_logs(u: float, order: int) -> Tuple[float, ...]:
    """(L_1, ..., L_order) with L_1 = u and L_k = log L_(k-1)."""
    logs = [u]
    for _ in range(order - 1):
        logs.append(math.log(logs[-1]) if logs[-1] > 0 else -math.inf)
    return tuple(logs)


@dataclass(frozen=True)
class GaugeFn:
    power: float
    log_power: float = 0.0
    coefficient: float = 1.0
    log_order: int = 1

    def __post_init__(self):
        if self.coefficient <= 0:
            raise GaugeError("gauge coefficient must be positive")
        if self.power < 0:
            raise GaugeError("gauge power must be nonnegative")
        if self.power == 0 and self.log_power >= 0:
            raise GaugeError("a gauge with power 0 needs a negative log power to vanish at 0")
        if not 1 <= self.log_order <= MAX_LOG_ORDER:
            raise GaugeError(f"log order must lie in 1..{MAX_LOG_ORDER}")

    @classmethod
    def parse(cls, text: str) -> "GaugeFn":
        """Read forms like ``r^0.5``, ``2*r^kappa*log^-1`` or ``r^0.3*loglog^2``."""
        power, log_power, coefficient, order = 0.0, 0.0, 1.0, 1
        for token in text.replace(" ", "").split("*"):
            name, _, exponent = token.partition("^")
            value = KAPPA if exponent == "kappa" else float(exponent or 1)
            if name == "r":
                power = value
            elif name and set(name) <= set("log") and name == "log" * (len(name) // 3):
                log_power, order = value, len(name) // 3
            else:
                try:
                    coefficient = float(token)
                except ValueError:
                    raise GaugeError(f"cannot read gauge term {token!r}") from None
        return cls(power, log_power, coefficient, order)

    @property
    def is_power(self) -> bool:
        return self.log_power == 0

    def describe(self) -> str:
        text = f"{self.coefficient:g}*r^{self.power:.17g}"
        if not self.is_power:
            text += f"*{'log' * self.log_order}^{self.log_power:.17g}"
        return text

    @cached_property
    def cutoff(self) -> float:
        """r0, the radius above which the gauge is held constant."""
        if self.is_power:
            return 1.0
        u = 1.0
        for _ in range(self.log_order - 1):
            u = math.exp(u)
        if self.log_power > 0:
            def monotone(x):
                return self.power * math.prod(_iterated_logs(x, self.log_order)) >= self.log_power

            if not monotone(u):
                high = 2 * u
                while not monotone(high):
                    high *= 2
                low = u
                for _ in range(200):
                    middle = (low + high) / 2
                    low, high = (low, middle) if monotone(middle) else (middle, high)
                u = high
        return math.exp(-u)

    def _shape(self, u: float) -> float:
        value = self.coefficient * math.exp(-self.power * u)
        if not self.is_power:
            value *= _iterated_logs(u, self.log_order)[-1] ** self.log_power
        return value

    def __call__(self, r) -> float:
        u = _log_of(r)
        return self._shape(max(u, -math.log(self.cutoff)))

    def evaluate(self, radii) -> np.ndarray:
        radii = np.asarray(radii, dtype=np.float64)
        if np.any(radii <= 0):
            raise GaugeError("gauges are evaluated at r > 0")
        u = np.maximum(-np.log(radii), -math.log(self.cutoff))
        values = self.coefficient * np.exp(-self.power * u)
        if not self.is_power:
            logs = u
            for _ in range(self.log_order - 1):
                logs = np.log(logs)
            values = values * logs ** self.log_power
        return values

    def __mul__(self, other: "GaugeFn") -> "GaugeFn":
        if not (self.is_power or other.is_power or self.log_order == other.log_order):
            raise GaugeError("products need matching log orders")
        order = other.log_order if self.is_power else self.log_order
        return GaugeFn(
            self.power + other.power,
            self.log_power + other.log_power,
            self.coefficient * other.coefficient,
            order,
        )

    def __truediv__(self, other: "GaugeFn") -> "GaugeFn":
        """Quotient; raises GaugeError when the result is not a gauge."""
        if not (self.is_power or other.is_power or self.log_order == other.log_order):
            raise GaugeError("quotients need matching log orders")
        order = other.log_order if self.is_power else self.log_order
        return GaugeFn(
            self.power - other.power,
            self.log_power - other.log_power,
            self.coefficient / other.coefficient,
            order,
        )


def gauge_eval(g: GaugeFn, r) -> float:
    return g(r)


def gauge_cutoff(g: GaugeFn) -> float:
    return g.cutoff


def doubling_scan(g: GaugeFn, J: int) -> float:
    """max over j = 1..J of g(2 * 2**-j) / g(2**-j)."""
    if J < 1:
        raise ValueError("J must be at least 1")
    if g.is_power:
        return 2.0 ** g.power
    return max(g(Fraction(2, 2 ** j)) / g(Fraction(1, 2 ** j)) for j in range(1, J + 1))


# ----------------- RADIUS FAMILIES ----------------- #

ENUMERATIONS = ("P", "PK", "K_b")


@lru_cache(maxsize=32)
def _enumeration_blocks(name: str, base: int, q_max: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Denominators, multiplicities and 1-based start indices of an enumeration up to q_max."""
    if name == "P":
        qs = np.arange(1, q_max + 1, dtype=np.int64)
        mults = totient_sieve(q_max)[1:].astype(np.int64)
    elif name == "PK":
        levels = [j for j in range(1, 64) if 3 ** j <= q_max]
        qs = np.array([3 ** j for j in levels], dtype=np.int64)
        mults = np.array([2 ** (j - 1) for j in levels], dtype=np.int64)
    elif name == "K_b":
        levels = [j for j in range(1, 64) if base ** j <= q_max]
        qs = np.array([base ** j for j in levels], dtype=np.int64)
        radical_share = math.prod(p - 1 for p in _primes_of(base)) / math.prod(_primes_of(base))
        mults = np.array([round(base ** j * radical_share) for j in levels], dtype=np.int64)
    else:
        raise ValueError(f"unknown enumeration {name!r}")
    starts = np.concatenate([[1], 1 + np.cumsum(mults)[:-1]]).astype(np.int64) if len(qs) else qs
    return qs, mults, starts


def _primes_of(n: int) -> Tuple[int, ...]:
    primes, p = [], 2
    while p * p <= n:
        if n % p == 0:
            primes.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        primes.append(n)
    return tuple(primes)


def _numerators(name: str, base: int, q: int) -> np.ndarray:
    if name == "PK":
        level = round(math.log(q) / LOG3)
        return 2 + 3 * level_cover_indices(level - 1)
    candidates = np.arange(q, dtype=np.int64)
    return candidates[np.gcd(candidates, q) == 1]


@dataclass(frozen=True)
class RadiiFamily:
    """Nonincreasing radii r_n, n >= 1.

    ``power`` families are r_n = n**-decay; enumeration families are 1/q_n with
    q_n running through an enumeration of reduced fractions in nondecreasing
    order of denominator; ``explicit`` families list their values.
    """

    kind: str
    decay: float = 1.0
    enumeration: str = ""
    base: int = 2
    sigma: float = KAPPA
    values: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind == "power" and self.decay <= 0:
            raise ValueError("power radii need a positive decay")
        if self.kind == "enumeration" and self.enumeration not in ENUMERATIONS:
            raise ValueError(f"enumeration must be one of {ENUMERATIONS}")
        if self.kind == "explicit":
            if any(not 0 < v <= 1 for v in self.values):
                raise ValueError("explicit radii must lie in (0, 1]")
            if any(a < b for a, b in zip(self.values, self.values[1:])):
                raise ValueError("explicit radii must be nonincreasing")
        if self.kind not in ("power", "enumeration", "explicit"):
            raise ValueError(f"unknown radii kind {self.kind!r}")

    @classmethod
    def power_law(cls, decay: float) -> "RadiiFamily":
        return cls("power", decay=decay)

    @classmethod
    def over(cls, enumeration: str, base: int = 2, sigma: float = KAPPA) -> "RadiiFamily":
        return cls("enumeration", enumeration=enumeration, base=base, sigma=sigma)

    @classmethod
    def parse(cls, text: str) -> "RadiiFamily":
        """``power:1.5``, ``enum:P``, ``enum:PK``, ``enum:K_b:2`` or ``explicit:0.5,0.25``."""
        kind, _, rest = text.strip().partition(":")
        if kind == "power":
            return cls.power_law(float(rest))
        if kind == "enum":
            name, _, base = rest.partition(":")
            return cls.over(name, int(base) if base else 2)
        if kind == "explicit":
            return cls("explicit", values=tuple(float(v) for v in rest.split(",") if v))
        raise ValueError(f"cannot read radii {text!r}")

    def _table(self, needed_index: int = 0, needed_q: int = 0):
        q_max = 64
        while True:
            qs, mults, starts = _enumeration_blocks(self.enumeration, self.base, q_max)
            total = int(starts[-1] + mults[-1] - 1) if len(qs) else 0
            if total >= needed_index and q_max >= needed_q:
                return qs, mults, starts
            q_max *= 4

    def denominators(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if self.kind != "enumeration":
            raise ValueError("only enumeration radii have denominators")
        if indices.size == 0:
            return indices
        qs, _, starts = self._table(needed_index=int(indices.max()))
        return qs[np.searchsorted(starts, indices, side="right") - 1]

    def radii(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if np.any(indices < 1):
            raise ValueError("radius indices start at 1")
        if self.kind == "power":
            return indices.astype(np.float64) ** -self.decay
        if self.kind == "enumeration":
            return 1.0 / self.denominators(indices).astype(np.float64)
        if indices.size and indices.max() > len(self.values):
            raise ValueError("index beyond the explicit radii list")
        return np.asarray(self.values, dtype=np.float64)[indices - 1]

    def radius(self, n: int) -> float:
        return float(self.radii([n])[0])

    def window(self, level: int, nu: float) -> Tuple[int, int]:
        """Inclusive index range {n : r_n**nu in [3**-(level+1), 3**-level)}; empty when lo > hi."""
        if nu <= 0:
            raise ValueError("nu must be positive")
        if self.kind == "power":
            exponent = self.decay * nu
            return math.floor(3 ** (level / exponent)) + 1, math.floor(3 ** ((level + 1) / exponent))
        if self.kind == "enumeration":
            q_low, q_high = 3 ** (level / nu), 3 ** ((level + 1) / nu)
            qs, mults, starts = self._table(needed_q=math.floor(q_high) + 1)
            inside = (qs > q_low) & (qs <= q_high)
            if not inside.any():
                return 1, 0
            first, last = np.nonzero(inside)[0][[0, -1]]
            return int(starts[first]), int(starts[last] + mults[last] - 1)
        values = np.asarray(self.values) ** nu
        inside = np.nonzero((values >= 3.0 ** -(level + 1)) & (values < 3.0 ** -level))[0]
        return (int(inside[0]) + 1, int(inside[-1]) + 1) if inside.size else (1, 0)

    def pairs(self, lo: int, hi: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(index, numerator, denominator) arrays for enumeration indices lo..hi."""
        if self.kind != "enumeration":
            raise ValueError("only enumeration radii carry fractions")
        if hi < lo:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, empty
        qs, mults, starts = self._table(needed_index=hi)
        first = int(np.searchsorted(starts, lo, side="right") - 1)
        last = int(np.searchsorted(starts, hi, side="right") - 1)
        indices, numerators, denominators = [], [], []
        for block in range(first, last + 1):
            q = int(qs[block])
            block_numerators = _numerators(self.enumeration, self.base, q)
            block_indices = starts[block] + np.arange(len(block_numerators), dtype=np.int64)
            keep = (block_indices >= lo) & (block_indices <= hi)
            indices.append(block_indices[keep])
            numerators.append(block_numerators[keep])
            denominators.append(np.full(int(keep.sum()), q, dtype=np.int64))
        return np.concatenate(indices), np.concatenate(numerators), np.concatenate(denominators)


def critical_exponent(r: RadiiFamily) -> float:
    if r.kind == "power":
        return 1.0 / r.decay
    if r.kind == "enumeration":
        return {"P": 2.0, "PK": r.sigma, "K_b": 1.0}[r.enumeration]
    raise ValueError("explicit radii lists have no asymptotics")


# ----------------- SERIES CRITERIA ----------------- #

@dataclass(frozen=True)
class SeriesReport:
    partial_sum: float
    verdict: str
    limit: Optional[float] = None


def _power_law_verdict(exponent: float, log_power: float, rho: float) -> str:
    """Verdict for sums of r_n**exponent * log(1/r_n)**-log_power."""
    if exponent > rho + CLOSE:
        return "converges"
    if exponent < rho - CLOSE:
        return "diverges"
    return "converges" if log_power > 1 + CLOSE else "diverges"


def series_partial(kind: str, g: GaugeFn, h: Optional[GaugeFn], r: RadiiFamily, N: int) -> SeriesReport:
    """Partial sum of r_n/g(r_n) (kind ``r/g``) or h(r_n) r_n/g(r_n) (kind ``hr/g``)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if kind not in ("r/g", "hr/g"):
        raise ValueError(f"unknown series kind {kind!r}")
    if kind == "hr/g" and h is None:
        raise ValueError("series hr/g needs h")
    radii = r.radii(np.arange(1, N + 1))
    terms = radii / g.evaluate(radii)
    if kind == "hr/g":
        terms = terms * h.evaluate(radii)
    partial = float(math.fsum(terms))
    symbolic = r.kind != "explicit" and g.log_order == 1 and (kind == "r/g" or h.is_power)
    if not symbolic:
        return SeriesReport(partial, "unknown")
    exponent = 1 - g.power + (h.power if kind == "hr/g" else 0.0)
    return SeriesReport(partial, _power_law_verdict(exponent, g.log_power, critical_exponent(r)))


def _dyadic_series(weight, reference: GaugeFn, J: int):
    total = []
    for j in range(1, J + 1):
        step = 1 / reference(Fraction(1, 2 ** j)) - 1 / reference(Fraction(1, 2 ** (j - 1)))
        total.append(weight(Fraction(1, 2 ** j)) * step)
    return math.fsum(total)


def precprec_partial(g: GaugeFn, h: GaugeFn, J: int) -> SeriesReport:
    """Sum over j = 1..J of g(2^-j) (1/h(2^-j) - 1/h(2^-(j-1)))."""
    if J < 1:
        raise ValueError("J must be at least 1")
    partial = _dyadic_series(g, h, J)
    if not (g.is_power and h.is_power):
        return SeriesReport(partial, "unknown")
    if h.power < g.power - CLOSE:
        ratio = 2.0 ** (h.power - g.power)
        scale = g.coefficient / h.coefficient * (1 - 2.0 ** -h.power)
        return SeriesReport(partial, "converges", scale * ratio / (1 - ratio))
    return SeriesReport(partial, "diverges")


def precphi_partial(g: GaugeFn, h: GaugeFn, phi: GaugeFn, J: int) -> SeriesReport:
    """Sum over j = 1..J of (g/h)(2^-j) (1/phi(2^-j) - 1/phi(2^-(j-1)))."""
    if J < 1:
        raise ValueError("J must be at least 1")
    start = 0
    while 2.0 ** -start > min(g.cutoff, h.cutoff):
        start += 1
    ratios = [g(Fraction(1, 2 ** j)) / h(Fraction(1, 2 ** j)) for j in range(start, max(J, start + 2) + 1)]
    if any(later >= earlier for earlier, later in zip(ratios, ratios[1:])):
        raise GaugeError("g/h does not decrease to zero along the dyadic scales")

    def ratio(r):
        return g(r) / h(r)

    partial = _dyadic_series(ratio, phi, J)
    if not (g.is_power and h.is_power and phi.is_power):
        return SeriesReport(partial, "unknown")
    gap = g.power - h.power
    if phi.power < gap - CLOSE:
        x = 2.0 ** (phi.power - gap)
        scale = g.coefficient / (h.coefficient * phi.coefficient) * (1 - 2.0 ** -phi.power)
        return SeriesReport(partial, "converges", scale * x / (1 - x))
    return SeriesReport(partial, "diverges")
