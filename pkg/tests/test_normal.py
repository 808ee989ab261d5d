"""Scalar Gaussian analytics against extended-precision oracles.

Oracles: mpmath's 50-digit normal CDF/quadrature and bisection on the
extended-precision CDF.  Expected constants below were computed with
those oracles and frozen; each test also recomputes the oracle so a
drifting implementation and a drifting constant cannot cancel.
"""

import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from gittins_lab.normal import (
    excess_sandwich,
    expected_excess,
    gordon_bounds,
    quantile_asymptotic,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    std_normal_sf,
)

mpmath.mp.dps = 50


def oracle_cdf(z: float) -> float:
    return float(mpmath.ncdf(z))


def oracle_quantile(p: float) -> float:
    """Bisection on the extended-precision CDF, independent of ndtri."""
    lo, hi = mpmath.mpf(-12), mpmath.mpf(12)
    target = mpmath.mpf(repr(p))
    for _ in range(200):
        mid = (lo + hi) / 2
        if mpmath.ncdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


def oracle_excess(sigma: float, lam: float) -> float:
    """Adaptive quadrature of the defining integral."""
    value, err = quad(
        lambda x: (x - lam) * math.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi)),
        lam,
        max(lam + 12 * sigma, 12 * sigma),
        epsabs=1e-13,
        epsrel=1e-13,
    )
    assert err < 1e-11
    return value


class TestPdf:
    def test_at_zero_is_inverse_root_two_pi(self):
        assert std_normal_pdf(0.0) == pytest.approx(0.3989422804, abs=1e-10)

    def test_at_one_matches_extended_precision(self):
        expected = 0.24197072451914335  # mpmath: exp(-1/2)/sqrt(2*pi)
        assert std_normal_pdf(1.0) == pytest.approx(expected, abs=1e-15)
        assert std_normal_pdf(1.0) == pytest.approx(
            float(mpmath.npdf(1)), abs=1e-15
        )

    def test_symmetry_and_positivity(self):
        for z in np.linspace(-10, 10, 101):
            assert std_normal_pdf(z) > 0.0
            assert std_normal_pdf(-z) == std_normal_pdf(z)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            std_normal_pdf(math.nan)
        with pytest.raises(ValueError):
            std_normal_pdf(math.inf)


class TestCdf:
    def test_median(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_near_97_5_percent_point(self):
        # z = 1.959964 is the canonical two-sided 5% point
        assert std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
        assert std_normal_cdf(1.959964) == pytest.approx(
            oracle_cdf(1.959964), abs=1e-14
        )

    def test_deep_lower_tail(self):
        expected = 6.220960574271786e-16  # mpmath.ncdf(-8)
        assert std_normal_cdf(-8.0) == pytest.approx(expected, rel=1e-12)
        assert std_normal_cdf(-8.0) == pytest.approx(oracle_cdf(-8.0), rel=1e-12)

    def test_absolute_accuracy_against_oracle(self):
        for z in np.linspace(-8, 8, 81):
            assert std_normal_cdf(z) == pytest.approx(oracle_cdf(z), abs=1e-12)

    def test_reflection_and_monotonicity(self):
        zs = np.linspace(-10, 10, 201)
        values = [std_normal_cdf(z) for z in zs]
        assert all(b >= a for a, b in zip(values, values[1:]))
        for z in zs:
            assert std_normal_cdf(-z) == pytest.approx(1.0 - std_normal_cdf(z), abs=1e-15)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            std_normal_cdf(math.inf)


class TestQuantile:
    def test_median(self):
        assert std_normal_quantile(0.5) == 0.0

    def test_97_5_percent_point(self):
        expected = 1.9599639845400545  # oracle bisection on mpmath.ncdf
        assert std_normal_quantile(0.975) == pytest.approx(expected, abs=1e-9)
        assert std_normal_quantile(0.975) == pytest.approx(
            oracle_quantile(0.975), abs=1e-9
        )

    def test_deep_tail_point(self):
        expected = 4.753424308822899  # oracle bisection at p = 1 - 1e-6
        assert std_normal_quantile(1.0 - 1e-6) == pytest.approx(expected, abs=1e-9)

    def test_round_trip_to_1e10(self):
        for p in [1e-10, 1e-6, 0.01, 0.3, 0.5, 0.9, 0.99, 1 - 1e-6, 1 - 1e-10]:
            assert std_normal_cdf(std_normal_quantile(p)) == pytest.approx(p, abs=1e-10)

    def test_round_trip_on_upper_grid(self):
        # grid reaching into the deep tail used by the sweep commands
        for p in 1.0 - np.geomspace(1e-12, 0.5, 40):
            assert std_normal_cdf(std_normal_quantile(p)) == pytest.approx(p, abs=1e-9)

    def test_strictly_increasing(self):
        ps = np.linspace(0.001, 0.999, 201)
        qs = [std_normal_quantile(p) for p in ps]
        assert all(b > a for a, b in zip(qs, qs[1:]))

    def test_rejects_endpoints_and_outside(self):
        for p in (0.0, 1.0, -0.1, 1.1, math.nan):
            with pytest.raises(ValueError):
                std_normal_quantile(p)


class TestQuantileAsymptotic:
    def test_unit_value(self):
        # p solving 2*log(1/(1-p)) = 1
        assert quantile_asymptotic(1.0 - math.exp(-0.5)) == pytest.approx(1.0, abs=1e-15)

    def test_at_99_percent(self):
        assert quantile_asymptotic(0.99) == pytest.approx(3.0348542588, abs=1e-9)

    def test_at_half(self):
        # valid formula evaluation even though the approximation is asymptotic
        assert quantile_asymptotic(0.5) == pytest.approx(math.sqrt(2 * math.log(2)), abs=1e-15)
        assert quantile_asymptotic(0.5) == pytest.approx(1.1774100226, abs=1e-9)

    def test_gap_to_true_quantile_decreases(self):
        # |quantile - asymptotic| shrinks along p = 1 - 10^-2k ... but only
        # loglog/sqrt(log) fast; the halving claim is exercised (and fails
        # honestly) in the acceptance suite.
        gaps = []
        for k in (2, 4, 6, 8, 10, 12):
            p = 1.0 - 10.0**-k
            gaps.append(abs(std_normal_quantile(p) - quantile_asymptotic(p)))
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_rejects_one(self):
        with pytest.raises(ValueError):
            quantile_asymptotic(1.0)


class TestGordonBounds:
    def test_reference_point_z2(self):
        lower, upper = gordon_bounds(2.0)
        true_tail = 1.0 - oracle_cdf(2.0)
        assert lower == pytest.approx(0.021596, abs=1e-6)
        assert upper == pytest.approx(0.026995, abs=1e-6)
        assert true_tail == pytest.approx(0.022750, abs=1e-6)
        assert lower <= true_tail <= upper

    def test_tight_bracket_at_z5(self):
        lower, upper = gordon_bounds(5.0)
        true_tail = 1.0 - oracle_cdf(5.0)
        assert lower <= true_tail <= upper
        assert upper - lower < 6e-8

    def test_vacuous_at_zero(self):
        assert gordon_bounds(0.0) == (0.0, 1.0)

    def test_brackets_true_tail_on_grid(self):
        # the tail must come through the survival function: 1 - cdf is
        # absorbed by rounding well before z = 8
        for z in np.linspace(0.2, 8.0, 40):
            lower, upper = gordon_bounds(z)
            tail = std_normal_sf(z)
            assert lower <= tail <= upper
            assert tail == pytest.approx(1.0 - oracle_cdf(z), rel=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            gordon_bounds(-0.5)


class TestExpectedExcess:
    def test_at_the_money(self):
        # E[X^+] = phi(0) by the defining integral
        assert expected_excess(1.0, 0.0) == pytest.approx(0.3989423, abs=1e-7)
        assert expected_excess(1.0, 0.0) == pytest.approx(oracle_excess(1.0, 0.0), abs=1e-12)

    def test_deep_tail(self):
        value = expected_excess(1.0, 10.0)
        # mpmath: phi(10) - 10*(1 - ncdf(10)) = 7.4745602546e-25
        assert value == pytest.approx(7.474560254589e-25, rel=1e-9)
        assert value < std_normal_pdf(10.0)

    def test_deep_in_the_money(self):
        value = expected_excess(2.0, -50.0)
        # exact identity E[(X+50)^+] = 50 + E[(X-50)^+]
        assert value == pytest.approx(50.0 + expected_excess(2.0, 50.0), abs=1e-12)
        assert value == pytest.approx(50.0, abs=1e-6)

    def test_matches_quadrature_on_grid(self):
        for sigma in (0.5, 1.0, 2.0):
            for ratio in (-1.0, 0.0, 0.5, 2.0, 3.0, 4.0, 6.0, 8.0):
                lam = ratio * sigma
                assert expected_excess(sigma, lam) == pytest.approx(
                    oracle_excess(sigma, lam), abs=1e-9
                )

    def test_monotone_decreasing_in_tax(self):
        lams = np.linspace(-3, 6, 60)
        values = [expected_excess(1.0, lam) for lam in lams]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert all(v >= 0.0 for v in values)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            expected_excess(0.0, 1.0)
        with pytest.raises(ValueError):
            expected_excess(-1.0, 1.0)


class TestExcessSandwich:
    def test_reference_point(self):
        s = excess_sandwich(1.0, 2.0)
        assert s.lower == pytest.approx(0.006748, abs=1e-6)
        assert s.exact == pytest.approx(0.008491, abs=1e-6)
        assert s.upper == pytest.approx(0.053991, abs=1e-6)
        assert s.lower <= s.exact <= s.upper

    def test_farther_tail_keeps_ordering(self):
        s = excess_sandwich(1.0, 4.0)
        assert s.lower == pytest.approx(2.0911e-6, rel=1e-3)
        assert s.exact == pytest.approx(7.1454e-6, rel=1e-3)
        assert s.lower <= s.exact <= s.upper

    def test_boundary_case(self):
        s = excess_sandwich(3.0, 6.0)
        assert s.lower <= s.exact <= s.upper

    def test_ordering_on_grid_with_quadrature(self):
        for sigma in (0.5, 1.0, 2.0):
            for z in (2.0, 3.0, 4.0, 6.0, 8.0):
                s = excess_sandwich(sigma, z * sigma)
                assert s.lower <= s.exact <= s.upper
                assert s.exact == pytest.approx(oracle_excess(sigma, z * sigma), abs=1e-9)

    def test_rejects_outside_validity_region(self):
        with pytest.raises(ValueError):
            excess_sandwich(1.0, 1.9)
