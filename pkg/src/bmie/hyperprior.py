"""Empirical-Bayes (type II maximum likelihood) fitting of the normal prior.

Given independent unit estimates ``x_m ~ N(mu_m, sigma_m^2)`` with known
``sigma_m`` and locations ``mu_m ~ N(eta, tau^2)``, the marginal law of
``x_m`` is ``N(eta, sigma_m^2 + tau^2)``.  The estimates here maximize the
marginal likelihood by alternating two exact coordinate updates:

* ``eta``  given ``tau``: the precision-weighted mean with weights
  ``1 / (sigma_m^2 + tau^2)``;
* ``tau^2`` given ``eta``: the root of the score
  ``D(t) = sum_m [ (x_m - eta)^2 - (sigma_m^2 + t) ] / (sigma_m^2 + t)^2``.

``D`` is strictly negative at ``t = (max x - min x)^2``, so a sign change on
``[floor^2, range^2]`` is found by bracketing whenever one exists.  When the
score is already non-positive at the floor, the likelihood is decreasing in
``tau`` everywhere and the estimate is clamped to a small positive floor
(the data show no excess dispersion beyond the sampling noise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .measures import Prior

__all__ = ["Ml2Result", "ml2_estimate"]


@dataclass(frozen=True)
class Ml2Result:
    """Fitted prior plus diagnostics of the alternating maximization."""

    prior: Prior
    iterations: int
    converged: bool
    residual: float
    tau_floored: bool


def _score(t2: float, xs: np.ndarray, sig2: np.ndarray, eta: float) -> float:
    v = sig2 + t2
    return float(np.sum(((xs - eta) ** 2 - v) / (v * v)))


def _eta_update(t2: float, xs: np.ndarray, sig2: np.ndarray) -> float:
    w = 1.0 / (sig2 + t2)
    return float(np.sum(w * xs) / np.sum(w))


def _tau2_update(
    eta: float, xs: np.ndarray, sig2: np.ndarray, floor2: float, hi: float
) -> tuple[float, bool]:
    if hi <= floor2 or _score(floor2, xs, sig2, eta) <= 0.0:
        return floor2, True
    root = brentq(_score, floor2, hi, args=(xs, sig2, eta), xtol=1e-15, maxiter=200)
    return float(root), False


def ml2_estimate(
    xs: Sequence[float],
    sigmas: Sequence[float],
    tol: float = 1e-10,
    max_iter: int = 500,
    tau_floor: float = 1e-8,
) -> Ml2Result:
    """Fit ``N(eta, tau^2)`` to unit estimates with known sampling scales.

    Alternates the two exact coordinate updates until the larger of the
    parameter changes drops below ``tol``.  The reported ``residual`` is the
    larger of the final eta self-consistency gap and the tau score scaled to
    parameter units (zero when the tau estimate sits on its floor, where the
    boundary value is the maximizer).
    """
    xs_arr = np.asarray([float(v) for v in xs], dtype=float)
    sig_arr = np.asarray([float(v) for v in sigmas], dtype=float)
    if xs_arr.ndim != 1 or xs_arr.size == 0:
        raise ValueError("xs must be a non-empty 1-d sequence")
    if xs_arr.shape != sig_arr.shape:
        raise ValueError(
            f"xs and sigmas must have equal length, got {xs_arr.size} and {sig_arr.size}"
        )
    if not np.isfinite(xs_arr).all():
        raise ValueError("every x must be finite")
    if not (np.isfinite(sig_arr).all() and (sig_arr > 0.0).all()):
        raise ValueError("every sigma must be finite and positive")
    if not (tol > 0.0 and math.isfinite(tol)):
        raise ValueError(f"tol must be a finite positive value, got {tol!r}")
    if int(max_iter) < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter!r}")
    if not (tau_floor > 0.0 and math.isfinite(tau_floor)):
        raise ValueError(f"tau_floor must be a finite positive value, got {tau_floor!r}")

    sig2 = sig_arr**2
    floor2 = float(tau_floor) ** 2
    data_range = float(xs_arr.max() - xs_arr.min())
    hi = max(data_range**2, floor2)

    eta = float(xs_arr.mean())
    t2, floored = _tau2_update(eta, xs_arr, sig2, floor2, hi)
    tau = math.sqrt(t2)

    converged = False
    iterations = 0
    for iterations in range(1, int(max_iter) + 1):
        eta_new = _eta_update(t2, xs_arr, sig2)
        t2, floored = _tau2_update(eta_new, xs_arr, sig2, floor2, hi)
        tau_new = math.sqrt(t2)
        change = max(abs(eta_new - eta), abs(tau_new - tau))
        eta, tau = eta_new, tau_new
        if change < tol:
            converged = True
            break

    r_eta = abs(eta - _eta_update(t2, xs_arr, sig2))
    if floored:
        r_tau = 0.0
    else:
        w2 = np.sum(1.0 / (sig2 + t2) ** 2)
        r_tau = abs(_score(t2, xs_arr, sig2, eta)) / float(w2)
    residual = max(r_eta, r_tau)

    return Ml2Result(
        prior=Prior(eta=eta, tau=tau),
        iterations=iterations,
        converged=converged,
        residual=residual,
        tau_floored=floored,
    )
