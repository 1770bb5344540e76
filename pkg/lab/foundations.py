"""
Exact arithmetic, circle geometry and keyed randomness.

Every other module builds on the three value types defined here:
``CirclePoint`` (a reduced rational in [0, 1)), ``BigFixed`` (a binary
fixed-point number with a recorded error bound) and ``RandomStream`` (a
counter-based random source addressed by a seed and a path of labels).
"""

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational as _RationalABC
from typing import Tuple, Union

import numpy as np

Rational = Fraction
RationalLike = Union[int, Fraction]

KAPPA = math.log(2) / math.log(3)
LOG3 = math.log(3)


def as_rational(x) -> Fraction:
    """Coerce ints, Fractions and decimal strings to a canonical Fraction.

    Floats are refused: a float here almost always means a lost exact value.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, _RationalABC)) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


@dataclass(frozen=True, order=True)
class CirclePoint:
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", as_rational(self.value))
        if not 0 <= self.value < 1:
            raise ValueError(f"circle point must lie in [0, 1), got {self.value}")

    def __add__(self, other: "CirclePoint") -> "CirclePoint":
        return reduce_to_circle(self.value + _value_of(other))

    def __sub__(self, other: "CirclePoint") -> "CirclePoint":
        return reduce_to_circle(self.value - _value_of(other))

    def __float__(self) -> float:
        return float(self.value)


def _value_of(x) -> Fraction:
    return x.value if isinstance(x, CirclePoint) else as_rational(x)


def reduce_to_circle(x: RationalLike) -> CirclePoint:
    x = as_rational(x)
    return CirclePoint(x - math.floor(x))


def circle_distance(x, y) -> Fraction:
    gap = abs(_value_of(x) - _value_of(y))
    gap -= math.floor(gap)
    return min(gap, 1 - gap)


# ----------------- FIXED POINT ----------------- #

@dataclass(frozen=True)
class BigFixed:
    """mantissa * 2**-precision_bits, with ``error`` bounding |stored - true|."""

    mantissa: int
    precision_bits: int
    error: Fraction = Fraction(0)

    def __post_init__(self):
        if self.precision_bits <= 0:
            raise ValueError("precision_bits must be positive")

    @classmethod
    def from_rational(cls, x: RationalLike, precision_bits: int) -> "BigFixed":
        x = as_rational(x)
        scaled = x * (1 << precision_bits)
        mantissa = math.floor(scaled)
        error = Fraction(0) if mantissa == scaled else Fraction(1, 1 << precision_bits)
        return cls(mantissa, precision_bits, error)

    @property
    def ulp(self) -> Fraction:
        return Fraction(1, 1 << self.precision_bits)

    def to_fraction(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.precision_bits)

    def _check_precision(self, other: "BigFixed"):
        if other.precision_bits != self.precision_bits:
            raise ValueError("BigFixed operands must share precision_bits")

    def __add__(self, other: "BigFixed") -> "BigFixed":
        self._check_precision(other)
        return BigFixed(self.mantissa + other.mantissa, self.precision_bits, self.error + other.error)

    def __sub__(self, other: "BigFixed") -> "BigFixed":
        self._check_precision(other)
        return BigFixed(self.mantissa - other.mantissa, self.precision_bits, self.error + other.error)

    def __mul__(self, other) -> "BigFixed":
        if isinstance(other, int):
            return BigFixed(self.mantissa * other, self.precision_bits, self.error * abs(other))
        self._check_precision(other)
        product = self.mantissa * other.mantissa
        mantissa = product >> self.precision_bits
        rounding = Fraction(0) if product == mantissa << self.precision_bits else self.ulp
        propagated = (
            abs(self.to_fraction()) * other.error
            + abs(other.to_fraction()) * self.error
            + self.error * other.error
        )
        return BigFixed(mantissa, self.precision_bits, propagated + rounding)

    __rmul__ = __mul__

    def fractional_part(self) -> "BigFixed":
        return BigFixed(self.mantissa & ((1 << self.precision_bits) - 1), self.precision_bits, self.error)

    def to_circle(self) -> CirclePoint:
        return reduce_to_circle(self.to_fraction())

    def __float__(self) -> float:
        return float(self.to_fraction())


def guard_precision(largest_multiplier: int, guard_bits: int = 64) -> int:
    """Bits needed so that {a*X} keeps ``guard_bits`` random bits for every a <= largest_multiplier."""
    return max(1, largest_multiplier.bit_length()) + guard_bits


# ----------------- KEYED RANDOMNESS ----------------- #

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX_1
    z = (z ^ (z >> np.uint64(27))) * _MIX_2
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class RandomStream:
    """A reproducible random source addressed by (root_seed, path).

    The Philox key is a BLAKE2b digest of the address, so streams do not
    share state and can be handed to any worker.
    """

    root_seed: int
    path: Tuple[Tuple[str, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= self.root_seed <= _MASK64:
            raise ValueError("root_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "path", tuple((str(label), int(index)) for label, index in self.path))

    @property
    def digest(self) -> bytes:
        address = [str(self.root_seed)] + [f"{label}:{index}" for label, index in self.path]
        return hashlib.blake2b("/".join(address).encode("utf-8"), digest_size=16).digest()

    @property
    def key(self) -> int:
        return int.from_bytes(self.digest, "little")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key))

    def words(self, count: int) -> np.ndarray:
        """The first ``count`` raw 64-bit outputs of the stream."""
        return np.random.Philox(key=self.key).random_raw(count).astype(np.uint64)

    def keyed_words(self, level: int, indices) -> np.ndarray:
        """One 64-bit word per (level, index), independent of draw order."""
        key_lo = np.uint64(self.key & _MASK64)
        key_hi = np.uint64(self.key >> 64)
        salt = _splitmix64(np.array([key_lo ^ np.uint64(level & _MASK64)], dtype=np.uint64))
        counters = np.asarray(indices, dtype=np.uint64)
        return _splitmix64(_splitmix64(counters ^ salt) ^ key_hi)

    def keyed_uniforms(self, level: int, indices) -> np.ndarray:
        return (self.keyed_words(level, indices) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def derive_stream(root: RandomStream, label: str, index: int) -> RandomStream:
    return RandomStream(root.root_seed, root.path + ((label, index),))
