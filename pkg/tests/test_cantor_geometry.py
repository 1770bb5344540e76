import random
from fractions import Fraction

import numpy as np
import pytest

from lab.cantor_geometry import (
    IntervalUnion,
    TriadicInterval,
    ahlfors_ratio,
    cantor_arc_measure,
    cantor_cdf,
    cantor_cdf_array,
    cantor_measure,
    cantor_successor,
    distance_to_cantor,
    in_cantor,
    level_cover,
    level_cover_indices,
    neighborhood_cover,
    removed_gap,
    ternary_expansion,
)


@pytest.mark.parametrize(
    "x, expected",
    [
        (Fraction(1, 4), True),
        (Fraction(3, 4), True),
        (Fraction(1, 3), True),
        (Fraction(2, 3), True),
        (Fraction(1, 10), True),
        (Fraction(1, 2), False),
        (Fraction(1, 6), False),
        (Fraction(1), True),
    ],
)
def test_membership(x, expected):
    assert in_cantor(x) is expected


def test_removed_gap_and_distance():
    assert removed_gap(1, 2) == (Fraction(1, 3), Fraction(2, 3))
    assert removed_gap(1, 4) is None
    assert distance_to_cantor(Fraction(1, 2)) == Fraction(1, 6)
    assert distance_to_cantor(Fraction(1, 6)) == Fraction(1, 18)
    assert cantor_successor(Fraction(1, 2)) == Fraction(2, 3)
    assert cantor_successor(Fraction(1, 4)) == Fraction(1, 4)


def test_ternary_expansion_of_a_quarter():
    expansion = ternary_expansion(Fraction(1, 4))
    assert expansion.preperiod == ()
    assert expansion.period == (0, 2)
    assert expansion.value() == Fraction(1, 4)


@pytest.mark.parametrize(
    "x, expected",
    [
        (Fraction(1, 4), Fraction(1, 3)),
        (Fraction(1, 10), Fraction(1, 5)),
        (Fraction(1, 2), Fraction(1, 2)),
        (Fraction(2, 3), Fraction(1, 2)),
        (Fraction(0), Fraction(0)),
        (Fraction(1), Fraction(1)),
    ],
)
def test_cantor_function(x, expected):
    assert cantor_cdf(x) == expected


def test_float_cantor_function_agrees_with_exact():
    points = [Fraction(1, 4), Fraction(1, 10), Fraction(5, 7), Fraction(2, 9)]
    exact = [float(cantor_cdf(x)) for x in points]
    assert cantor_cdf_array([float(x) for x in points]) == pytest.approx(exact, abs=1e-8)


def test_triadic_intervals():
    cell = TriadicInterval(2, 5)
    assert cell.left == Fraction(5, 9)
    assert cell.center == Fraction(11, 18)
    assert cell.parent() == TriadicInterval(1, 1)
    with pytest.raises(ValueError):
        TriadicInterval(1, 3)


def test_level_cover():
    assert list(level_cover_indices(2)) == [0, 2, 6, 8]
    assert len(level_cover(5)) == 32
    assert all(in_cantor(cell.left) for cell in level_cover(3))


def test_intervals_wrap_and_merge():
    union = IntervalUnion.from_arcs([(Fraction(-1, 4), Fraction(1, 4)), (Fraction(1, 8), Fraction(3, 8))])
    assert union.components == ((Fraction(0), Fraction(3, 8)), (Fraction(3, 4), Fraction(1)))
    assert union.length == Fraction(5, 8)
    assert union.contains(Fraction(7, 8))
    assert not union.contains(Fraction(1, 2))


def test_neighborhood_cover_joins_across_zero():
    union = neighborhood_cover(2, Fraction(1, 81))
    assert len(union.components) == 4
    assert union.length == Fraction(42, 81)


def test_cantor_measure_of_whole_circle():
    assert cantor_measure(IntervalUnion.whole()) == 1
    assert cantor_measure(IntervalUnion.from_arcs([(Fraction(0), Fraction(1, 3))])) == Fraction(1, 2)


def test_ahlfors_ratio_at_zero_sees_both_sides():
    measure, ratio = ahlfors_ratio(Fraction(0), Fraction(1, 9))
    assert measure == Fraction(1, 2)
    assert ratio == pytest.approx(2.0)


def test_ahlfors_ratio_stays_bounded():
    for j in range(1, 8):
        _, ratio = ahlfors_ratio(Fraction(1, 4), Fraction(1, 3 ** j))
        assert 0.25 <= ratio <= 4.0


def test_ahlfors_ratio_rejects_points_off_the_set():
    with pytest.raises(ValueError):
        ahlfors_ratio(Fraction(1, 2), Fraction(1, 9))
    with pytest.raises(ValueError):
        ahlfors_ratio(Fraction(1, 4), Fraction(2, 3))


def test_arc_measure_wraps():
    measure = cantor_arc_measure(np.array([-0.1]), np.array([0.1]))
    assert measure[0] == pytest.approx(0.4, abs=1e-8)
    assert cantor_arc_measure(np.array([0.2]), np.array([1.3]))[0] == 1.0


def test_distance_matches_brute_force_over_cell_endpoints():
    level = 12
    indices = level_cover_indices(level)
    endpoints = np.sort(np.concatenate([indices, indices + 1]).astype(np.float64) / 3 ** level)
    rng = random.Random(5)
    for _ in range(400):
        q = rng.randint(2, 10 ** 5)
        p = rng.randint(0, q - 1)
        x = p / q
        brute = float(np.min(np.abs(endpoints - x)))
        assert abs(float(distance_to_cantor(Fraction(p, q))) - brute) <= 3.0 ** -level + 1e-15


def test_cantor_function_and_distance_are_symmetric():
    rng = random.Random(11)
    for _ in range(200):
        q = rng.randint(2, 5000)
        x = Fraction(rng.randint(1, q - 1), q)
        assert cantor_cdf(x) + cantor_cdf(1 - x) == 1
        assert distance_to_cantor(x) == distance_to_cantor(1 - x)


@pytest.mark.parametrize("level", [0, 1, 3, 6])
def test_construction_cells_carry_equal_mass(level):
    for cell in level_cover(level):
        assert cantor_measure(IntervalUnion.from_arcs([(cell.left, cell.right)])) == Fraction(1, 2 ** level)
