"""Tests for the exact performance measures of thresholded interval rules.

High-precision reference values are frozen literals computed with 40-digit
arithmetic.
"""

import math

import numpy as np
import pytest

from bmie.measures import (
    GlobalMeasures,
    Prior,
    UnitSpec,
    bcp,
    bcp_d2nu,
    bcp_dnu,
    bel,
    btr,
    c_m,
    global_measures,
    sidak_alpha,
    sidak_nu,
)
from bmie.statcore import adaptive_rule, norm_cdf

# 40-digit reference values, frozen as literals.
CM_35_5_3 = 1.80073514399634279247584132983        # c_m(3.5, 5, 3)
BEL_REF = 15.8589362450483615677904886689          # bel(1.6449, 3.5, 5, 3)
BCP_REF_A = 0.939686141526612344422347126682       # bcp(1.96, 2, 1, 2)
BCP_REF_B = 0.8659817776287777277818222076         # bcp(1.5, 3, 2, 3)
BCPDNU_REF = 0.259026987365595497825224480032      # bcp_dnu(1.5, 3, 2, 3)
BCPD2NU_REF = -0.388517369889635258169231291252    # bcp_d2nu(1.5, 3, 2, 3)

SIDAK_NU = {
    2: 1.94882186250705864166729573865,
    5: 2.31066008428067084549289097109,
    387: 3.64040234504273295356864916811,
    1000: 3.87791626126186187097236934082,
    3571: 4.17726093460078175857901569621,
}
SIDAK_ALPHA_M2 = 0.0513167019494862004003319366702

# Reference values on the benchmark grid sigma = linspace(0.01, 10, 1000),
# q = 0.1, individual levels at the Sidak allocation.
GRID_BTR_35_T3 = 0.1053654670355626384317721
GRID_BREL_35_T3 = 0.9188388112009092009911396
GRID_BTR_20_T2 = 0.4099829573060472851286561
GRID_BREL_20_T2 = 0.7339056355492686437924019


def _benchmark_grid():
    return np.linspace(0.01, 10.0, 1000)


class TestCm:
    def test_reference_value(self):
        assert c_m(3.5, 5.0, 3.0) == pytest.approx(CM_35_5_3, abs=1e-14)

    def test_zero_threshold(self):
        assert c_m(0.0, 1.7, 2.2) == 0.0

    def test_infinite_threshold(self):
        assert c_m(math.inf, 1.7, 2.2) == math.inf

    def test_scales_with_tau(self):
        # c_m = C tau / sqrt(sigma^2 + tau^2) grows to C as tau dominates.
        assert c_m(2.0, 1.0, 1e9) == pytest.approx(2.0, rel=1e-12)


class TestBel:
    def test_reference_value(self):
        assert bel(1.6449, 3.5, 5.0, 3.0) == pytest.approx(BEL_REF, abs=1e-12)

    def test_zero_threshold_gives_half_length(self):
        # At C = 0 both sides are dropped half the time each: bel = nu sigma.
        assert bel(2.0, 0.0, 1.5, 2.0) == pytest.approx(2.0 * 1.5, abs=1e-14)

    def test_infinite_threshold_gives_full_length(self):
        assert bel(2.0, math.inf, 1.5, 2.0) == pytest.approx(2.0 * 2.0 * 1.5, abs=1e-14)

    def test_monotone_in_threshold(self):
        vals = [bel(1.9, c, 2.0, 1.5) for c in (0.0, 0.5, 1.0, 2.0, 4.0, math.inf)]
        assert all(a < b or math.isclose(a, b) for a, b in zip(vals, vals[1:]))


class TestBcp:
    def test_reference_values(self):
        assert bcp(1.96, 2.0, 1.0, 2.0) == pytest.approx(BCP_REF_A, abs=1e-11)
        assert bcp(1.5, 3.0, 2.0, 3.0) == pytest.approx(BCP_REF_B, abs=1e-11)

    def test_infinite_threshold_closed_form(self):
        # With the threshold disabled the rule is the two-sided z interval.
        nu = 2.3
        assert bcp(nu, math.inf, 1.2, 0.8) == pytest.approx(
            2.0 * norm_cdf(nu) - 1.0, abs=1e-14
        )

    def test_large_cm_short_circuit_continuity(self):
        # Just below and just above the closed-form switch should agree.
        sigma, tau, nu = 1.0, 2.0, 2.0
        c_lo = 7.999 * math.hypot(sigma, tau) / tau
        c_hi = 8.001 * math.hypot(sigma, tau) / tau
        assert bcp(nu, c_lo, sigma, tau) == pytest.approx(
            bcp(nu, c_hi, sigma, tau), abs=1e-12
        )

    def test_zero_level_gives_zero_coverage(self):
        assert bcp(0.0, 2.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-14)

    def test_adaptive_rule_agrees(self):
        ref = bcp(1.5, 3.0, 2.0, 3.0)
        assert bcp(1.5, 3.0, 2.0, 3.0, rule=adaptive_rule()) == pytest.approx(
            ref, abs=1e-9
        )

    def test_monotone_in_nu(self):
        vals = [bcp(nu, 2.5, 1.0, 2.0) for nu in (0.5, 1.0, 2.0, 3.0)]
        assert all(a < b for a, b in zip(vals, vals[1:]))


class TestBcpDerivatives:
    def test_reference_values(self):
        assert bcp_dnu(1.5, 3.0, 2.0, 3.0) == pytest.approx(BCPDNU_REF, abs=1e-12)
        assert bcp_d2nu(1.5, 3.0, 2.0, 3.0) == pytest.approx(BCPD2NU_REF, abs=1e-12)

    def test_first_derivative_matches_finite_difference(self):
        h = 1e-6
        for nu, C, sigma, tau in [(1.2, 2.0, 0.7, 1.4), (2.4, 4.0, 3.0, 1.0)]:
            fd = (bcp(nu + h, C, sigma, tau) - bcp(nu - h, C, sigma, tau)) / (2 * h)
            assert bcp_dnu(nu, C, sigma, tau) == pytest.approx(fd, abs=5e-9)

    def test_second_derivative_matches_finite_difference(self):
        h = 1e-5
        nu, C, sigma, tau = 1.7, 2.5, 1.1, 2.2
        fd = (
            bcp_dnu(nu + h, C, sigma, tau) - bcp_dnu(nu - h, C, sigma, tau)
        ) / (2 * h)
        assert bcp_d2nu(nu, C, sigma, tau) == pytest.approx(fd, abs=5e-9)

    def test_infinite_threshold_closed_forms(self):
        nu = 1.3
        phi = math.exp(-0.5 * nu * nu) / math.sqrt(2 * math.pi)
        assert bcp_dnu(nu, math.inf, 1.0, 1.0) == pytest.approx(2 * phi, abs=1e-14)
        assert bcp_d2nu(nu, math.inf, 1.0, 1.0) == pytest.approx(
            -2 * nu * phi, abs=1e-14
        )


class TestSidak:
    def test_alpha_reference(self):
        assert sidak_alpha(0.1, 2) == pytest.approx(SIDAK_ALPHA_M2, abs=1e-16)

    @pytest.mark.parametrize("M", sorted(SIDAK_NU))
    def test_nu_reference(self, M):
        assert sidak_nu(0.1, M) == pytest.approx(SIDAK_NU[M], abs=1e-12)

    def test_single_unit_reduces_to_marginal(self):
        assert sidak_alpha(0.1, 1) == pytest.approx(0.1, abs=1e-16)

    def test_alpha_is_stable_for_huge_M(self):
        # Naive 1 - (1 - q)^(1/M) loses precision; the log1p/expm1 form must not.
        a = sidak_alpha(0.1, 10 ** 12)
        assert a == pytest.approx(-math.expm1(math.log1p(-0.1) / 10 ** 12), rel=1e-12)
        assert a > 0

    @pytest.mark.parametrize("q, M", [(0.0, 10), (1.0, 10), (0.1, 0)])
    def test_rejects_bad_arguments(self, q, M):
        with pytest.raises(ValueError):
            sidak_alpha(q, M)


class TestBtr:
    def test_grid_reference_values(self):
        sig = _benchmark_grid()
        assert btr(3.5, sig, 3.0) == pytest.approx(GRID_BTR_35_T3, abs=1e-12)
        assert btr(2.0, sig, 2.0) == pytest.approx(GRID_BTR_20_T2, abs=1e-12)

    def test_zero_threshold_gives_unity(self):
        # At C = 0 every unit drops one side with probability one.
        assert btr(0.0, np.array([0.5, 1.0, 2.0]), 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_infinite_threshold_gives_zero(self):
        assert btr(math.inf, np.array([0.5, 1.0]), 1.0) == 0.0


class TestGlobalMeasures:
    def test_grid_reference_values(self):
        sig = _benchmark_grid()
        nu_s = sidak_nu(0.1, sig.size)
        gm = global_measures(np.full(sig.size, nu_s), 3.5, sig, 3.0, 0.1)
        assert isinstance(gm, GlobalMeasures)
        assert gm.brel == pytest.approx(GRID_BREL_35_T3, abs=1e-11)
        assert gm.btr == pytest.approx(GRID_BTR_35_T3, abs=1e-12)
        assert gm.bfwcr == pytest.approx(0.8600744236282859, abs=1e-9)

    def test_zero_threshold_identities(self):
        # Dropping one side halves every expected length: brel = 1/2 exactly.
        sig = _benchmark_grid()
        nu_s = sidak_nu(0.1, sig.size)
        gm = global_measures(np.full(sig.size, nu_s), 0.0, sig, 2.0, 0.1)
        assert gm.brel == pytest.approx(0.5, abs=1e-12)
        assert gm.btr == pytest.approx(1.0, abs=1e-15)

    def test_bael_is_mean_of_unit_lengths(self):
        sig = np.array([0.5, 1.5, 3.0])
        nus = np.array([1.9, 2.1, 2.4])
        gm = global_measures(nus, 2.0, sig, 1.5, 0.1)
        expected = np.mean([bel(n, 2.0, s, 1.5) for n, s in zip(nus, sig)])
        assert gm.bael == pytest.approx(expected, abs=1e-13)

    def test_bfwcr_is_product_of_unit_coverages(self):
        sig = np.array([0.5, 1.5, 3.0])
        nus = np.array([1.9, 2.1, 2.4])
        gm = global_measures(nus, 2.0, sig, 1.5, 0.1)
        expected = np.prod([bcp(n, 2.0, s, 1.5) for n, s in zip(nus, sig)])
        assert gm.bfwcr == pytest.approx(expected, rel=1e-12)

    def test_zero_level_unit_kills_family_coverage(self):
        sig = np.array([1.0, 2.0])
        gm = global_measures(np.array([0.0, 2.0]), 3.0, sig, 1.0, 0.1)
        assert gm.bfwcr == 0.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            global_measures(np.array([1.0, 2.0]), 2.0, np.array([1.0]), 1.0, 0.1)

    def test_negative_level_rejected(self):
        with pytest.raises(ValueError):
            global_measures(np.array([-0.1]), 2.0, np.array([1.0]), 1.0, 0.1)


class TestInputValidation:
    @pytest.mark.parametrize("sigma", [0.0, -1.0, math.nan])
    def test_bad_sigma(self, sigma):
        with pytest.raises(ValueError):
            bel(2.0, 1.0, sigma, 1.0)

    @pytest.mark.parametrize("tau", [0.0, -2.0, math.inf])
    def test_bad_tau(self, tau):
        with pytest.raises(ValueError):
            bcp(2.0, 1.0, 1.0, tau)

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            bel(2.0, -0.5, 1.0, 1.0)

    def test_prior_validation(self):
        with pytest.raises(ValueError):
            Prior(eta=0.0, tau=0.0)
        with pytest.raises(ValueError):
            Prior(eta=math.nan, tau=1.0)

    def test_unit_spec_validation(self):
        spec = UnitSpec(sigma=0.5, xbar=1.2)
        assert spec.sigma == 0.5 and spec.xbar == 1.2
        with pytest.raises(ValueError):
            UnitSpec(sigma=-1.0)
        with pytest.raises(ValueError):
            UnitSpec(sigma=1.0, xbar=math.inf)
