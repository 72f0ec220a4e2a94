"""Estimator-style wrappers around the interval constructors.

Each class follows the fit/predict convention: ``X`` is an array-like of
shape ``(n_units, 2)`` whose columns are the unit estimate and its sampling
standard deviation.  ``fit`` resolves everything data-dependent (prior
hyperparameters, threshold, per-unit levels) and ``predict`` emits one
:class:`~bmie.estimators.Interval` per row.  Hyperparameters passed to the
constructor are stored verbatim; fitted state lives in trailing-underscore
attributes.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from .estimators import Interval, bie_thres, credible_mie, z_mie
from .hyperprior import ml2_estimate
from .measures import Prior, sidak_nu
from .optimizer import find_c_star, optimize_levels

__all__ = ["BaseMie", "ZClassicalMie", "ThresholdedMie", "CredibleMie"]


def _split_units(X) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise ValueError(
            "X must have shape (n_units, 2) with columns (estimate, sigma)"
        )
    if not np.isfinite(arr).all():
        raise ValueError("every entry of X must be finite")
    xbar, sigma = arr[:, 0], arr[:, 1]
    if (sigma <= 0.0).any():
        raise ValueError("every sigma (second column of X) must be positive")
    return xbar, sigma


class BaseMie(BaseEstimator):
    """Shared fit/predict plumbing; subclasses fill in the interval rule."""

    def _require_fitted(self, attr: str):
        if not hasattr(self, attr):
            raise RuntimeError(
                f"{type(self).__name__} must be fitted before calling predict"
            )

    def fit(self, X, y=None):
        raise NotImplementedError

    def predict(self, X):
        raise NotImplementedError


class ZClassicalMie(BaseMie):
    """Equal-width intervals at the Sidak-adjusted individual level."""

    def __init__(self, q: float = 0.1):
        self.q = q

    def fit(self, X, y=None):
        _, sigma = _split_units(X)
        self.n_units_ = int(sigma.size)
        self.nu_ = sidak_nu(self.q, sigma.size)
        return self

    def predict(self, X):
        self._require_fitted("nu_")
        xbar, sigma = _split_units(X)
        return [z_mie(x, self.nu_, s) for x, s in zip(xbar, sigma)]


class ThresholdedMie(BaseMie):
    """Thresholded intervals with optimized per-unit levels.

    With ``prior=None`` the prior is fitted by marginal maximum likelihood;
    with ``c_star=None`` the threshold is chosen by grid search, otherwise
    levels are optimized at the given threshold.
    """

    def __init__(
        self,
        q: float = 0.1,
        beta: float = 1000.0,
        prior: Optional[Prior] = None,
        c_star: Optional[float] = None,
        c_grid=None,
    ):
        self.q = q
        self.beta = beta
        self.prior = prior
        self.c_star = c_star
        self.c_grid = c_grid

    def fit(self, X, y=None):
        xbar, sigma = _split_units(X)
        if self.prior is None:
            self.ml2_ = ml2_estimate(xbar, sigma)
            self.prior_ = self.ml2_.prior
        else:
            self.ml2_ = None
            self.prior_ = self.prior
        if self.c_star is None:
            search = find_c_star(
                sigma, self.prior_.tau, self.q, self.beta, c_grid=self.c_grid
            )
            self.search_ = search
            self.c_star_ = search.c_star
            self.allocation_ = search.allocation
        else:
            self.search_ = None
            self.c_star_ = float(self.c_star)
            self.allocation_ = optimize_levels(
                self.c_star_, sigma, self.prior_.tau, self.q, self.beta
            )
        self.n_units_ = int(sigma.size)
        return self

    def predict(self, X):
        self._require_fitted("allocation_")
        xbar, sigma = _split_units(X)
        if xbar.size != self.n_units_:
            raise ValueError(
                f"predict needs the {self.n_units_} fitted units, got {xbar.size}"
            )
        return [
            bie_thres(x, nu, s, self.c_star_, self.prior_.eta, self.prior_.tau)
            for x, nu, s in zip(xbar, self.allocation_.nus, sigma)
        ]


class CredibleMie(BaseMie):
    """Posterior credible intervals at the Sidak-adjusted individual level."""

    def __init__(self, q: float = 0.1, prior: Optional[Prior] = None):
        self.q = q
        self.prior = prior

    def fit(self, X, y=None):
        xbar, sigma = _split_units(X)
        if self.prior is None:
            self.ml2_ = ml2_estimate(xbar, sigma)
            self.prior_ = self.ml2_.prior
        else:
            self.prior_ = self.prior
        self.nu_ = sidak_nu(self.q, sigma.size)
        self.n_units_ = int(sigma.size)
        return self

    def predict(self, X):
        self._require_fitted("nu_")
        xbar, sigma = _split_units(X)
        return [
            credible_mie(x, self.nu_, s, self.prior_.eta, self.prior_.tau)
            for x, s in zip(xbar, sigma)
        ]
