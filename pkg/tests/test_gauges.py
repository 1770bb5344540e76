import math
from fractions import Fraction

import numpy as np
import pytest

from lab.errors import GaugeError
from lab.foundations import KAPPA
from lab.gauges import (
    GaugeFn,
    RadiiFamily,
    critical_exponent,
    doubling_scan,
    precphi_partial,
    precprec_partial,
    series_partial,
)


def test_parse_gauges():
    assert GaugeFn.parse("r^0.5") == GaugeFn(0.5)
    assert GaugeFn.parse("2*r^kappa*log^-1") == GaugeFn(KAPPA, -1.0, 2.0, 1)
    assert GaugeFn.parse("r^0.3*loglog^2") == GaugeFn(0.3, 2.0, 1.0, 2)
    with pytest.raises(GaugeError):
        GaugeFn.parse("r^0.5*sin")


def test_invalid_gauges():
    with pytest.raises(GaugeError):
        GaugeFn(-0.1)
    with pytest.raises(GaugeError):
        GaugeFn(0.0)
    with pytest.raises(GaugeError):
        GaugeFn(0.5, coefficient=0)
    assert GaugeFn(0.0, -1.0).log_power == -1.0


def test_power_gauge_values():
    g = GaugeFn(0.5)
    assert g.cutoff == 1.0
    assert g(Fraction(1, 4)) == pytest.approx(0.5)
    assert g(Fraction(1, 3 ** 400)) == pytest.approx(3.0 ** -200)
    with pytest.raises(GaugeError):
        g(0)


def test_log_gauge_is_constant_above_its_cutoff():
    g = GaugeFn.parse("r^0.5*log^1")
    assert g.cutoff == pytest.approx(math.exp(-2))
    assert g(math.exp(-3)) == pytest.approx(math.exp(-1.5) * 3)
    assert g(0.5) == pytest.approx(2 * math.exp(-1))
    assert g(0.9) == g(0.5)


def test_vectorised_evaluation_matches_scalar():
    g = GaugeFn.parse("r^0.4*log^-2")
    radii = np.array([0.5, 0.1, 1e-5, 1e-40])
    assert g.evaluate(radii) == pytest.approx([g(float(r)) for r in radii])


def test_products_and_quotients():
    product = GaugeFn(0.3) * GaugeFn(0.4)
    assert product.power == pytest.approx(0.7)
    assert (GaugeFn(0.7) / GaugeFn(0.5)).power == pytest.approx(0.2)
    with pytest.raises(GaugeError):
        GaugeFn(0.5) / GaugeFn(0.5)
    with pytest.raises(GaugeError):
        GaugeFn(0.5, 1.0, log_order=1) * GaugeFn(0.5, 1.0, log_order=2)


def test_doubling_constant():
    assert doubling_scan(GaugeFn(0.5), 10) == pytest.approx(math.sqrt(2))
    assert doubling_scan(GaugeFn.parse("r^0.5*log^1"), 30) < 2


def test_power_law_windows():
    radii = RadiiFamily.power_law(1)
    assert radii.window(2, 1.5) == (5, 9)
    assert radii.radius(4) == 0.25


def test_enumeration_of_all_fractions():
    radii = RadiiFamily.over("P")
    assert list(radii.denominators([1, 2, 3, 4, 5, 6])) == [1, 2, 3, 3, 4, 4]
    indices, p, q = radii.pairs(1, 6)
    assert list(indices) == [1, 2, 3, 4, 5, 6]
    assert list(p) == [0, 1, 1, 2, 1, 3]
    assert list(q) == [1, 2, 3, 3, 4, 4]
    assert radii.radius(5) == 0.25


def test_enumeration_of_triadic_points_of_K():
    radii = RadiiFamily.over("PK")
    _, p, q = radii.pairs(1, 3)
    assert list(p) == [2, 2, 8]
    assert list(q) == [3, 9, 9]


def test_base_b_enumeration():
    radii = RadiiFamily.parse("enum:K_b:2")
    _, p, q = radii.pairs(1, 3)
    assert list(zip(p, q)) == [(1, 2), (1, 4), (3, 4)]


def test_enumeration_windows_are_consistent_with_radii():
    radii = RadiiFamily.over("P")
    lo, hi = radii.window(3, 2.5)
    values = radii.radii(np.arange(lo, hi + 1)) ** 2.5
    assert np.all(values >= 3.0 ** -4)
    assert np.all(values < 3.0 ** -3)


def test_explicit_radii():
    radii = RadiiFamily.parse("explicit:0.5,0.25,0.125")
    assert radii.radius(3) == 0.125
    assert radii.window(1, 1.0) == (2, 3)
    with pytest.raises(ValueError):
        RadiiFamily.parse("explicit:0.25,0.5")
    with pytest.raises(ValueError):
        radii.radius(4)


def test_critical_exponents():
    assert critical_exponent(RadiiFamily.power_law(2)) == 0.5
    assert critical_exponent(RadiiFamily.over("P")) == 2.0
    assert critical_exponent(RadiiFamily.over("PK")) == KAPPA


def test_series_verdicts():
    converging = series_partial("r/g", GaugeFn(0.2), None, RadiiFamily.power_law(2), 1)
    assert converging.partial_sum == 1.0
    assert converging.verdict == "converges"
    assert series_partial("r/g", GaugeFn(0.5), None, RadiiFamily.power_law(1), 100).verdict == "diverges"
    # at the critical exponent the log power decides
    critical = GaugeFn(0.5, 2.0)
    assert series_partial("r/g", critical, None, RadiiFamily.power_law(2), 10).verdict == "converges"
    assert series_partial("r/g", GaugeFn(0.0, -2.0), None, RadiiFamily.power_law(1), 10).verdict == "diverges"
    weighted = series_partial("hr/g", GaugeFn(0.5), GaugeFn(0.5), RadiiFamily.power_law(1), 10)
    assert weighted.partial_sum == pytest.approx(sum(1 / n for n in range(1, 11)))
    assert weighted.verdict == "diverges"


def test_series_needs_h_for_weighted_sums():
    with pytest.raises(ValueError):
        series_partial("hr/g", GaugeFn(0.5), None, RadiiFamily.power_law(1), 10)


def test_dyadic_series():
    assert precprec_partial(GaugeFn(1.0), GaugeFn(1.0), 1).partial_sum == pytest.approx(0.5)
    report = precprec_partial(GaugeFn(0.7), GaugeFn(0.5), 200)
    x = 2.0 ** -0.2
    assert report.verdict == "converges"
    assert report.limit == pytest.approx((1 - 2 ** -0.5) * x / (1 - x))
    assert report.partial_sum == pytest.approx(report.limit, rel=1e-6)
    assert precprec_partial(GaugeFn(0.5), GaugeFn(0.7), 5).verdict == "diverges"


def test_precphi_needs_a_decreasing_ratio():
    with pytest.raises(GaugeError):
        precphi_partial(GaugeFn(0.5), GaugeFn(0.5), GaugeFn(0.1), 10)
    report = precphi_partial(GaugeFn(0.9), GaugeFn(0.5), GaugeFn(0.2), 200)
    assert report.verdict == "converges"
    assert report.partial_sum == pytest.approx(report.limit, rel=1e-6)
