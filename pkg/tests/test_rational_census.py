import math
from fractions import Fraction

import pytest

from lab.cantor_geometry import in_cantor
from lab.errors import EstimationError
from lab.foundations import KAPPA
from lab.rational_census import (
    MU_STAR,
    CensusRecord,
    PairRange,
    Threshold,
    base_b_count,
    conjecture_bound,
    conjecture_report,
    count_denominator,
    exact_in_K_count,
    fitted_exponent,
    format_mu,
    mobius_divisors,
    coprime_count_upto,
    mu_regime,
    near_K_count,
    near_K_count_fast,
    pair_within,
    parse_mu,
    reference_dimensions,
    sigma_estimate,
    totient_count,
    totient_sieve,
    weak_variant_target,
)


def test_pair_range_bounds():
    pairs = PairRange(1)
    assert (pairs.q_low, pairs.q_high) == (3, 8)
    assert sum(1 for _ in pairs.pairs()) == totient_count(1)


def test_totient_counts():
    assert totient_count(0) == 2
    assert totient_count(1) == 20
    assert list(totient_sieve(10)[1:]) == [1, 1, 2, 2, 4, 2, 6, 4, 6, 4]


def test_coprime_counting_by_inclusion_exclusion():
    divisors = mobius_divisors(12)
    assert coprime_count_upto(11, divisors) == 4
    assert coprime_count_upto(-1, divisors) == 0
    assert coprime_count_upto(5, divisors) == 2


def test_exact_membership_at_level_one():
    # 1/3, 2/3, 1/4 and 3/4
    assert exact_in_K_count(1) == 4


def test_mu_zero_admits_every_pair():
    assert near_K_count(2, 0).count == totient_count(2)
    assert near_K_count_fast(2, 0).count == totient_count(2)


@pytest.mark.parametrize("mu", ["inf", "0", "1", "2", "5/2", 2.77, "3", "4"])
@pytest.mark.parametrize("j", [1, 2, 3])
def test_walk_agrees_with_scan(j, mu):
    assert near_K_count_fast(j, mu).count == near_K_count(j, mu).count


def test_counts_shrink_as_mu_grows():
    counts = [near_K_count_fast(3, mu).count for mu in ("1", "2", "3", "4", "inf")]
    assert counts == sorted(counts, reverse=True)


def test_threshold_is_strict():
    threshold = Threshold.for_level(1, Fraction(2))
    assert threshold.admits(Fraction(1, 10))
    assert not threshold.admits(Fraction(1, 9))
    assert threshold.admits(Fraction(0))


def test_irrational_mu_is_rounded_up_to_a_dyadic():
    threshold = Threshold.for_level(3, MU_STAR)
    assert threshold.rounding == "ceil-2^-20"
    assert threshold.exponent >= MU_STAR * 3
    assert threshold.exponent - Fraction(MU_STAR * 3) < Fraction(1, 2 ** 20)


def test_pair_within_uses_exact_distance():
    threshold = Threshold.for_level(1, Fraction(1))
    # d(1/2, K) = 1/6 < 1/3
    assert pair_within(1, 2, threshold)
    assert not pair_within(1, 2, Threshold.for_level(2, Fraction(1)))
    assert pair_within(1, 4, Threshold(None))


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        count_denominator(5, Threshold(None), "guess")


def test_census_needs_positive_level():
    with pytest.raises(ValueError):
        near_K_count(0, "2")


def test_base_b_counts():
    assert base_b_count(2, 2) == 2
    assert base_b_count(2, 3) == 0
    assert base_b_count(3, 3) == 8
    with pytest.raises(ValueError):
        base_b_count(1, 3)


def test_bounds_and_regimes():
    assert MU_STAR == pytest.approx(3.7095, abs=1e-4)
    assert conjecture_bound(math.inf) == KAPPA
    assert conjecture_bound(Fraction(2)) == pytest.approx(2 * KAPPA)
    assert conjecture_bound(Fraction(10)) == KAPPA
    assert mu_regime(Fraction(2)) == "below"
    assert mu_regime(MU_STAR) == "critical"
    assert mu_regime(Fraction(4)) == "above"


def test_weak_variant_target():
    assert weak_variant_target(Fraction(2)) == pytest.approx(KAPPA)
    assert weak_variant_target(math.inf) == 0.0
    with pytest.raises(ValueError):
        weak_variant_target(Fraction(2), sigma=2.0)


def test_mu_parsing_and_labels():
    assert parse_mu("inf") == math.inf
    assert parse_mu("5/2") == Fraction(5, 2)
    assert parse_mu("mu_star") == MU_STAR
    assert format_mu(Fraction(5, 2)) == "2.5"
    assert format_mu(Fraction(7, 3)) == "7/3"
    assert format_mu(math.inf) == "inf"


def test_sigma_estimate_takes_tail_maxima():
    records = [CensusRecord(j, Fraction(2), count, "walk") for j, count in ((1, 9), (2, 3), (3, 27))]
    report = sigma_estimate(records)
    assert report.levels == (1, 2, 3)
    assert report.values[0] == pytest.approx(2.0)
    assert report.tail_max[0] == pytest.approx(2.0)
    assert report.tail_max[1] == pytest.approx(1.0)


def test_sigma_estimate_rejects_gaps():
    records = [CensusRecord(1, Fraction(2), 3, "walk"), CensusRecord(3, Fraction(2), 9, "walk")]
    with pytest.raises(ValueError):
        sigma_estimate(records)
    with pytest.raises(EstimationError):
        sigma_estimate([])


def test_fitted_exponent_of_powers_of_two():
    records = [CensusRecord(j, math.inf, 2 ** j, "walk") for j in range(1, 6)]
    slope, stderr = fitted_exponent(records)
    assert slope == pytest.approx(KAPPA)
    assert stderr == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(EstimationError):
        fitted_exponent(records[:1])


def test_conjecture_report_columns():
    frame = conjecture_report([1, 2], ["2", "inf"])
    assert list(frame["j"]) == [1, 2, 1, 2]
    assert frame.loc[frame["mu"] == "inf", "mu_regime"].unique().tolist() == ["membership"]
    assert (frame["exact_density"] == frame.loc[frame["mu"] == "inf", "log3_density"].tolist() * 2).all()


def test_reference_dimensions():
    landmarks = reference_dimensions(Fraction(4))
    assert landmarks["full_line"] == pytest.approx(0.5)
    assert landmarks["cantor_lower"] == pytest.approx(KAPPA / 4)
    assert landmarks["cantor_upper"] == pytest.approx(KAPPA / 2)



# ----------------- ORACLES ----------------- #

def _cantor_numerators(q):
    """Numerators r with r/q in K: no residue 3**n * r mod q lands strictly between q/3 and 2q/3."""
    preimages = [[] for _ in range(q)]
    for r in range(q):
        preimages[3 * r % q].append(r)
    outside = [q < 3 * r < 2 * q for r in range(q)]
    pending = [r for r in range(q) if outside[r]]
    while pending:
        for r in preimages[pending.pop()]:
            if not outside[r]:
                outside[r] = True
                pending.append(r)
    return [r for r in range(q) if not outside[r] and math.gcd(r, q) == 1]


def _periodicity_count(j):
    return sum(len(_cantor_numerators(q)) for q in PairRange(j).denominators())


@pytest.mark.parametrize("j", [1, 2, 3, 4, 5])
def test_membership_counts_match_the_periodicity_oracle(j):
    count = exact_in_K_count(j)
    assert count == _periodicity_count(j)
    assert count >= 2 ** (j - 1)


def test_membership_counts_at_low_levels():
    assert [exact_in_K_count(j) for j in range(1, 6)] == [4, 16, 36, 156, 336]


def test_level_two_members_include_the_ninths_and_tenths():
    members = {(p, q) for p, q in PairRange(2).pairs() if pair_within(p, q, Threshold(None))}
    expected = {(1, 9), (2, 9), (7, 9), (8, 9), (1, 10), (3, 10), (7, 10), (9, 10)}
    assert expected <= members
    assert all(in_cantor(Fraction(p, q)) for p, q in expected)
    assert members == {(p, q) for q in PairRange(2).denominators() for p in _cantor_numerators(q)}


@pytest.mark.parametrize("j", [4, 5, 6, 7])
def test_pair_counts_grow_like_nine_to_the_j(j):
    assert 2.2 <= totient_count(j) / 9 ** j <= 2.7


def test_report_densities_fall_with_mu_and_stay_above_membership():
    frame = conjecture_report([2, 3, 4], ["2", "2.5", "3.5", "mu_star", "4"])
    for _, level in frame.groupby("j", sort=True):
        densities = level["log3_density"].tolist()
        assert densities == sorted(densities, reverse=True)
        assert (level["log3_density"] >= level["exact_density"]).all()
    assert frame.loc[frame["mu_regime"] == "critical", "bound"].iloc[0] == pytest.approx(KAPPA)


@pytest.mark.slow
@pytest.mark.parametrize("mu", [0, 1, 2, 2.77, 4, "inf"])
@pytest.mark.parametrize("j", [4, 5])
def test_walk_agrees_with_scan_at_acceptance_levels(j, mu):
    assert near_K_count_fast(j, mu).count == near_K_count(j, mu).count


@pytest.mark.slow
def test_membership_counts_at_higher_levels():
    counts = {j: exact_in_K_count(j) for j in range(6, 9)}
    assert counts[6] == 928
    assert counts[7] == 2236
    assert all(count >= 2 ** (j - 1) for j, count in counts.items())


@pytest.mark.slow
def test_report_densities_at_acceptance_levels():
    frame = conjecture_report([6, 7, 8], ["2", "2.5", "3.5", "4"])
    for _, level in frame.groupby("j", sort=True):
        densities = level["log3_density"].tolist()
        assert densities == sorted(densities, reverse=True)
        assert (level["log3_density"] >= level["exact_density"]).all()
    assert set(frame["mu_regime"]) == {"below", "above"}
