from fractions import Fraction

import numpy as np
import pytest

from lab.foundations import (
    BigFixed,
    CirclePoint,
    RandomStream,
    as_rational,
    circle_distance,
    derive_stream,
    guard_precision,
    reduce_to_circle,
)


def test_circle_points_wrap_around():
    total = CirclePoint(Fraction(3, 4)) + CirclePoint(Fraction(1, 2))
    assert total == CirclePoint(Fraction(1, 4))
    assert CirclePoint(Fraction(1, 4)) - CirclePoint(Fraction(1, 2)) == CirclePoint(Fraction(3, 4))


def test_circle_point_rejects_one():
    with pytest.raises(ValueError):
        CirclePoint(Fraction(1))


def test_floats_are_not_silently_accepted():
    with pytest.raises(TypeError):
        as_rational(0.5)
    assert as_rational("2/6") == Fraction(1, 3)


def test_reduce_and_distance():
    assert reduce_to_circle(Fraction(-1, 3)).value == Fraction(2, 3)
    assert circle_distance(Fraction(1, 10), Fraction(9, 10)) == Fraction(1, 5)
    assert circle_distance(Fraction(1, 4), Fraction(1, 4)) == 0


def test_bigfixed_tracks_its_error():
    third = BigFixed.from_rational(Fraction(1, 3), 64)
    assert third.error == Fraction(1, 2 ** 64)
    assert third.to_fraction() <= Fraction(1, 3)

    tripled = (third * 3).fractional_part()
    assert tripled.error == Fraction(3, 2 ** 64)
    assert circle_distance(tripled.to_fraction(), 0) <= tripled.error


def test_bigfixed_exact_values_carry_no_error():
    half = BigFixed.from_rational(Fraction(1, 2), 8)
    assert half.error == 0
    assert (half * half).to_fraction() == Fraction(1, 4)
    assert (half + half).to_fraction() == 1


def test_bigfixed_precision_must_match():
    with pytest.raises(ValueError):
        BigFixed.from_rational(Fraction(1, 2), 8) + BigFixed.from_rational(Fraction(1, 2), 16)


def test_guard_precision():
    assert guard_precision(2 ** 100) == 101 + 64
    assert guard_precision(1, guard_bits=10) == 11


def test_streams_are_reproducible_and_separate():
    root = RandomStream(7)
    assert np.array_equal(root.words(4), RandomStream(7).words(4))
    assert not np.array_equal(derive_stream(root, "a", 0).words(4), derive_stream(root, "a", 1).words(4))
    assert not np.array_equal(derive_stream(root, "a", 0).words(4), derive_stream(root, "b", 0).words(4))


def test_keyed_words_do_not_depend_on_order():
    stream = RandomStream(11)
    forward = stream.keyed_words(3, [1, 5, 9])
    shuffled = stream.keyed_words(3, [9, 1, 5])
    assert np.array_equal(forward, shuffled[[1, 2, 0]])
    assert not np.array_equal(stream.keyed_words(3, [1]), stream.keyed_words(4, [1]))


def test_keyed_uniforms_lie_in_unit_interval(stream):
    values = stream.keyed_uniforms(5, np.arange(10000))
    assert values.min() >= 0.0
    assert values.max() < 1.0
    assert abs(values.mean() - 0.5) < 0.02


def test_negative_seed_is_rejected():
    with pytest.raises(ValueError):
        RandomStream(-1)
