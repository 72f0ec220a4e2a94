"""Tests for marginal maximum likelihood estimation of the prior."""

import math

import numpy as np
import pytest

from bmie.hyperprior import Ml2Result, ml2_estimate
from bmie.measures import Prior

# 40-digit reference solution for xs = [0, 2, 5, 9], sigmas = [0.5, 1, 2, 1.5].
ETA_INTERIOR = 3.73613622968451416802576873965
TAU_INTERIOR = 3.20860068682016989982124160792


class TestInteriorSolution:
    def setup_method(self):
        self.xs = np.array([0.0, 2.0, 5.0, 9.0])
        self.sigmas = np.array([0.5, 1.0, 2.0, 1.5])
        self.res = ml2_estimate(self.xs, self.sigmas)

    def test_reference_values(self):
        assert self.res.prior.eta == pytest.approx(ETA_INTERIOR, abs=1e-9)
        assert self.res.prior.tau == pytest.approx(TAU_INTERIOR, abs=1e-9)

    def test_diagnostics(self):
        assert isinstance(self.res, Ml2Result)
        assert self.res.converged
        assert not self.res.tau_floored
        assert self.res.residual <= 1e-8
        assert self.res.iterations >= 1

    def test_score_equations_hold(self):
        # eta is the precision-weighted mean at the solution and the tau
        # score vanishes.
        eta, tau = self.res.prior.eta, self.res.prior.tau
        w = 1.0 / (self.sigmas ** 2 + tau ** 2)
        assert eta == pytest.approx(float(np.sum(w * self.xs) / np.sum(w)), abs=1e-10)
        score = float(np.sum(((self.xs - eta) ** 2 - 1.0 / w) * w ** 2))
        assert abs(score) <= 1e-10


class TestFlooredSolution:
    def test_overdispersed_noise_floors_tau(self):
        # Spread is fully explained by the sampling noise, so tau collapses.
        res = ml2_estimate(np.array([0.0, 1.0, 5.0]), np.array([0.5, 1.0, 2.0]))
        assert res.tau_floored
        assert res.prior.tau == pytest.approx(1e-8, rel=1e-12)
        # With tau at the floor the weights are ~1/sigma^2.
        assert res.prior.eta == pytest.approx(3.0 / 7.0, abs=1e-10)
        assert res.converged

    def test_custom_floor(self):
        res = ml2_estimate(
            np.array([0.0, 1.0, 5.0]),
            np.array([0.5, 1.0, 2.0]),
            tau_floor=1e-3,
        )
        assert res.tau_floored
        assert res.prior.tau == pytest.approx(1e-3, rel=1e-12)


class TestEqualSigmaClosedForm:
    @pytest.mark.parametrize("sigma", [0.3, 1.0, 2.5])
    def test_matches_moment_solution(self, sigma):
        rng = np.random.default_rng(8121)
        xs = rng.normal(1.5, 2.0, size=40)
        sigmas = np.full(xs.size, sigma)
        res = ml2_estimate(xs, sigmas)
        var = float(np.mean((xs - np.mean(xs)) ** 2))
        tau2 = max(1e-16, var - sigma ** 2)
        assert res.prior.eta == pytest.approx(float(np.mean(xs)), abs=1e-8)
        assert res.prior.tau ** 2 == pytest.approx(tau2, abs=1e-8)

    def test_equal_sigma_floored_case(self):
        xs = np.array([0.1, -0.1, 0.05, -0.05])
        res = ml2_estimate(xs, np.full(4, 3.0))
        assert res.tau_floored
        assert res.prior.eta == pytest.approx(float(np.mean(xs)), abs=1e-12)


class TestValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ml2_estimate(np.array([1.0, 2.0]), np.array([1.0]))

    def test_single_observation_degenerates_to_floor(self):
        # One unit carries no information about the spread of locations.
        res = ml2_estimate(np.array([1.0]), np.array([1.0]))
        assert res.tau_floored
        assert res.prior.eta == pytest.approx(1.0, abs=1e-15)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            ml2_estimate(np.array([]), np.array([]))

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError):
            ml2_estimate(np.array([1.0, 2.0]), np.array([1.0, 0.0]))

    def test_nonfinite_observation_rejected(self):
        with pytest.raises(ValueError):
            ml2_estimate(np.array([1.0, math.nan]), np.array([1.0, 1.0]))

    def test_result_prior_type(self):
        res = ml2_estimate(np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 1.0]))
        assert isinstance(res.prior, Prior)


class TestDeterminism:
    def test_repeated_calls_identical(self):
        xs = np.array([0.0, 2.0, 5.0, 9.0])
        sigmas = np.array([0.5, 1.0, 2.0, 1.5])
        a = ml2_estimate(xs, sigmas)
        b = ml2_estimate(xs, sigmas)
        assert a == b
