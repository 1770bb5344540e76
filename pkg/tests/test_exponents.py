import math
from fractions import Fraction

import mpmath
import pytest

from lab.errors import EstimationError
from lab.exponents import (
    ApproxWitness,
    conjectured_vb_dimension,
    continued_fraction,
    convergent_witnesses,
    convergents,
    exponent_from_witnesses,
    floor_power,
    lsv_dimension_target,
    lsv_partial_sum,
    lsv_witnesses,
    vb_profile,
)
from lab.foundations import KAPPA


def test_continued_fraction_of_a_rational():
    cf = continued_fraction(Fraction(415, 93))
    assert cf.quotients == (4, 2, 6, 7)
    assert cf.value() == Fraction(415, 93)
    assert convergents(cf) == [Fraction(4), Fraction(9, 2), Fraction(58, 13), Fraction(415, 93)]


def test_convergent_witnesses_skip_integers_and_the_value_itself():
    witnesses = convergent_witnesses(Fraction(415, 93))
    assert [w.approximant for w in witnesses] == [Fraction(9, 2), Fraction(58, 13)]
    assert witnesses[0].error_bound == abs(Fraction(415, 93) - Fraction(9, 2))


def test_floor_power():
    assert floor_power(Fraction(3, 2), 4) == 5
    assert floor_power(mpmath.sqrt(2), 3) == 2
    assert floor_power(mpmath.sqrt(2), 5) == 5


@pytest.mark.parametrize(
    "mu, J, value, tail",
    [
        (2, 2, Fraction(20, 81), Fraction(3, 3 ** 8)),
        (3, 1, Fraction(2, 27), Fraction(3, 3 ** 9)),
        (3, 2, Fraction(1460, 19683), Fraction(3, 3 ** 27)),
    ],
)
def test_lsv_partial_sums(mu, J, value, tail):
    partial = lsv_partial_sum(mu, J)
    assert partial.value == value
    assert partial.tail_bound == tail


def test_lsv_estimate_approaches_mu():
    estimate = exponent_from_witnesses(lsv_witnesses(3, 5))
    assert estimate.value == pytest.approx(728 / 243)
    assert estimate.value < 3


def test_empty_witness_list():
    with pytest.raises(EstimationError):
        exponent_from_witnesses([])
    with pytest.raises(ValueError):
        ApproxWitness(Fraction(1, 2), Fraction(0), 2)


def test_vb_profile_of_a_quarter():
    profile = vb_profile(Fraction(1, 4), 3, 6)
    assert set(profile.distances) == {Fraction(1, 4)}
    assert profile.estimate.value == pytest.approx(KAPPA)
    assert profile.exact_hits == ()
    assert profile.convention_value == 0.0


def test_vb_profile_lists_exact_hits():
    profile = vb_profile(Fraction(1, 9), 3, 3)
    assert profile.exact_hits == (2, 3)
    assert len(profile.estimate.witnesses) == 1


def test_dimension_targets():
    assert conjectured_vb_dimension(9, 1) == pytest.approx(KAPPA / 2)
    assert conjectured_vb_dimension(3, 1) == pytest.approx(KAPPA / 2)
    assert conjectured_vb_dimension(2, 1) == pytest.approx(0.5 + KAPPA - 1)
    assert conjectured_vb_dimension(2, 10) == 0.0
    assert lsv_dimension_target(2) == pytest.approx(KAPPA / 3)


def test_lsv_series_needs_mu_of_at_least_two():
    with pytest.raises(ValueError):
        lsv_partial_sum(Fraction(3, 2), 3)


def test_base_three_profile_of_an_lsv_sum_is_consistent_with_mu():
    estimate = exponent_from_witnesses(lsv_witnesses(3, 5))
    profile = vb_profile(lsv_partial_sum(3, 5).value, 3, 243)
    # deepest gap of zeros sits after digit 81: ||3^81 x|| = 2 * 3^-162
    assert profile.estimate.value == pytest.approx(2 - math.log(4, 3) / 81, rel=1e-9)
    assert profile.exact_hits == (243,)
    assert 2.85 <= estimate.value <= 3.05
    assert profile.estimate.value + 1 <= 3 + 0.1
    assert estimate.value >= profile.estimate.value + 1 - 0.1
