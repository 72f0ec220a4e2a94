"""Interval constructors, data transforms and realized-performance helpers.

Five interval families are supported.  ``z_mie`` is the classical equal-width
z interval.  ``bie_thres`` is the thresholded interval: a side whose outward
extension is not supported by the prior (the estimate falls outside
``eta +/- C*tau`` on that side) is dropped, leaving the endpoint at the
estimate itself, so extreme estimates get one-sided intervals of half the
length.  ``credible_mie`` is the posterior credible interval under the normal
prior.  The *_prior / *_estimated family labels distinguish whether prior
hyperparameters are supplied or fitted from the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .measures import UnitSpec
from .statcore import t_quantile

__all__ = [
    "Interval",
    "MieFamily",
    "z_mie",
    "bie_thres",
    "credible_mie",
    "t_thres",
    "arcsine_unit",
    "normal_scores",
    "coverage_ratio",
    "relative_content",
]


@dataclass(frozen=True)
class Interval:
    """A single interval with flags marking sides dropped by thresholding."""

    lower: float
    upper: float
    thresholded_left: bool = False
    thresholded_right: bool = False

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError("interval endpoints must not be NaN")
        if self.lower > self.upper:
            raise ValueError(
                f"lower endpoint {self.lower!r} exceeds upper endpoint {self.upper!r}"
            )

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        """Closed-endpoint containment."""
        return self.lower <= value <= self.upper


class MieFamily(Enum):
    """The five competing multiple-interval families."""

    Z_CLASSICAL = "z_classical"
    THRESHOLDED_PRIOR = "thresholded_prior"
    THRESHOLDED_ESTIMATED = "thresholded_estimated"
    CREDIBLE_PRIOR = "credible_prior"
    CREDIBLE_ESTIMATED = "credible_estimated"


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise ValueError(f"{name} must be a finite positive value, got {value!r}")
    return value


def z_mie(xbar: float, nu: float, sigma: float) -> Interval:
    """Classical interval ``xbar +/- nu*sigma``."""
    xbar = _check_finite("xbar", xbar)
    nu = _check_finite("nu", nu)
    if nu < 0.0:
        raise ValueError(f"nu must be >= 0, got {nu!r}")
    sigma = _check_positive("sigma", sigma)
    return Interval(lower=xbar - nu * sigma, upper=xbar + nu * sigma)


def bie_thres(
    xbar: float, nu: float, sigma: float, C: float, eta: float, tau: float
) -> Interval:
    """Thresholded interval around ``xbar``.

    The lower extension is kept only while ``xbar > eta - C*tau`` and the
    upper extension only while ``xbar < eta + C*tau``; a dropped side leaves
    that endpoint at ``xbar``.
    """
    xbar = _check_finite("xbar", xbar)
    nu = _check_finite("nu", nu)
    if nu < 0.0:
        raise ValueError(f"nu must be >= 0, got {nu!r}")
    sigma = _check_positive("sigma", sigma)
    C = float(C)
    if math.isnan(C) or C < 0.0:
        raise ValueError(f"threshold C must satisfy C >= 0, got {C!r}")
    eta = _check_finite("eta", eta)
    tau = _check_positive("tau", tau)
    keep_low = math.isinf(C) or xbar > eta - C * tau
    keep_high = math.isinf(C) or xbar < eta + C * tau
    return Interval(
        lower=xbar - nu * sigma * keep_low,
        upper=xbar + nu * sigma * keep_high,
        thresholded_left=not keep_low,
        thresholded_right=not keep_high,
    )


def credible_mie(xbar: float, nu: float, sigma: float, eta: float, tau: float) -> Interval:
    """Posterior credible interval under the normal prior ``N(eta, tau^2)``."""
    xbar = _check_finite("xbar", xbar)
    nu = _check_finite("nu", nu)
    if nu < 0.0:
        raise ValueError(f"nu must be >= 0, got {nu!r}")
    sigma = _check_positive("sigma", sigma)
    eta = _check_finite("eta", eta)
    tau = _check_positive("tau", tau)
    t2 = tau * tau
    s2 = sigma * sigma
    center = (t2 * xbar + s2 * eta) / (s2 + t2)
    sd = sigma * tau / math.sqrt(s2 + t2)
    return Interval(lower=center - nu * sd, upper=center + nu * sd)


def t_thres(
    group1: Sequence[float],
    group2: Sequence[float],
    alpha: float,
    C: float,
    eta: float,
    tau: float,
) -> Interval:
    """Thresholded two-sample t interval for a difference of means.

    The center is ``mean(group1) - mean(group2)``; the half-width uses the
    pooled standard deviation and the two-sided t quantile at level ``alpha``.
    Thresholding acts on the center exactly as in :func:`bie_thres`.
    """
    g1 = np.asarray([float(v) for v in group1], dtype=float)
    g2 = np.asarray([float(v) for v in group2], dtype=float)
    if g1.size < 1 or g2.size < 1 or g1.size + g2.size < 3:
        raise ValueError("need at least three observations across the two groups")
    if not (np.isfinite(g1).all() and np.isfinite(g2).all()):
        raise ValueError("every observation must be finite")
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly in (0, 1), got {alpha!r}")
    n1, n2 = g1.size, g2.size
    df = n1 + n2 - 2
    center = float(g1.mean() - g2.mean())
    ss = float(np.sum((g1 - g1.mean()) ** 2) + np.sum((g2 - g2.mean()) ** 2))
    if ss <= 0.0:
        raise ValueError("pooled spread is zero; a t interval is undefined")
    sp = math.sqrt(ss / df)
    hw = t_quantile(1.0 - alpha / 2.0, df) * sp * math.sqrt(1.0 / n1 + 1.0 / n2)
    C = float(C)
    if math.isnan(C) or C < 0.0:
        raise ValueError(f"threshold C must satisfy C >= 0, got {C!r}")
    eta = _check_finite("eta", eta)
    tau = _check_positive("tau", tau)
    keep_low = math.isinf(C) or center > eta - C * tau
    keep_high = math.isinf(C) or center < eta + C * tau
    return Interval(
        lower=center - hw * keep_low,
        upper=center + hw * keep_high,
        thresholded_left=not keep_low,
        thresholded_right=not keep_high,
    )


def arcsine_unit(hits: int, at_bats: int) -> UnitSpec:
    """Variance-stabilized unit for a batting record.

    Maps a hit count out of ``at_bats`` to ``arcsin(sqrt((H + 1/4)/(N + 1/2)))``
    with sampling standard deviation ``1/(2*sqrt(N))``.
    """
    hits = int(hits)
    at_bats = int(at_bats)
    if at_bats < 1:
        raise ValueError(f"at_bats must be >= 1, got {at_bats!r}")
    if not 0 <= hits <= at_bats:
        raise ValueError(f"hits must lie in [0, at_bats], got {hits!r} of {at_bats!r}")
    x = math.asin(math.sqrt((hits + 0.25) / (at_bats + 0.5)))
    return UnitSpec(sigma=1.0 / (2.0 * math.sqrt(at_bats)), xbar=x)


def normal_scores(values, rank_scope: str = "matrix") -> np.ndarray:
    """Rank-based transform of values to standard normal quantiles.

    Each value is replaced by ``Phi^{-1}((rank - 0.5)/count)`` with average
    ranks for ties.  ``rank_scope='matrix'`` ranks a 2-d array jointly across
    all entries; ``rank_scope='row'`` ranks each row on its own.  A 1-d input
    is ranked as a single batch under either scope.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("values must be non-empty")
    if not np.isfinite(arr).all():
        raise ValueError("every value must be finite")
    if rank_scope not in ("matrix", "row"):
        raise ValueError(f"rank_scope must be 'matrix' or 'row', got {rank_scope!r}")
    if arr.ndim == 1 or rank_scope == "matrix":
        ranks = rankdata(arr, method="average").reshape(arr.shape)
        count = arr.size
    elif arr.ndim == 2:
        ranks = rankdata(arr, method="average", axis=1)
        count = arr.shape[1]
    else:
        raise ValueError(f"values must be 1-d or 2-d, got {arr.ndim}-d")
    p = (ranks - 0.5) / count
    return ndtri(p)


def coverage_ratio(intervals: Sequence[Interval], truths: Sequence[float]) -> float:
    """Fraction of intervals containing their target (closed endpoints)."""
    ints = list(intervals)
    vals = [float(v) for v in truths]
    if len(ints) != len(vals):
        raise ValueError(
            f"intervals and truths must have equal length, got {len(ints)} and {len(vals)}"
        )
    if not ints:
        raise ValueError("need at least one interval")
    return sum(iv.covers(v) for iv, v in zip(ints, vals)) / len(ints)


def relative_content(
    intervals: Sequence[Interval], reference: Sequence[Interval]
) -> float:
    """Total length of ``intervals`` relative to the total of ``reference``."""
    ints = list(intervals)
    refs = list(reference)
    if len(ints) != len(refs):
        raise ValueError(
            f"intervals and reference must have equal length, got {len(ints)} and {len(refs)}"
        )
    if not ints:
        raise ValueError("need at least one interval")
    denom = sum(iv.length for iv in refs)
    if denom <= 0.0:
        raise ValueError("reference intervals have zero total length")
    return sum(iv.length for iv in ints) / denom
