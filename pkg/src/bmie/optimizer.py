"""Constrained allocation of per-unit confidence levels and threshold search.

The core problem: choose per-unit half-width multipliers ``nu_m`` minimizing
the bounded length loss

    (1/M) * sum_m  bel_m / (beta + bel_m),        bel_m = 2*nu_m*sigma_m*Phi(c_m),

subject to the family-wise coverage constraint

    sum_m log bcp_m(nu_m) = log(1 - q).

The loss transform ``x/(beta+x)`` is increasing and concave, so small ``beta``
rewards uneven allocations while large ``beta`` approaches minimizing the
total expected length.  The solver runs Newton-Raphson on the KKT system in
``(nu, lambda)``.  Steps are taken at full length, clipped only to keep every
``nu_m`` strictly positive; residual-based step damping is deliberately not
used because at any feasible iterate the constraint residual is zero and the
first productive step necessarily grows it, which a damped scheme rejects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .measures import (
    UnitSpec,
    _as_sigma_array,
    _bcp_d2nu_many,
    _bcp_dnu_many,
    _bcp_many,
    _bel_many,
    _check_tau,
    _check_threshold,
    _cm_many,
    sidak_nu,
)
from .statcore import norm_cdf

__all__ = [
    "OptimizationError",
    "LevelAllocation",
    "CStarResult",
    "default_c_grid",
    "optimize_levels",
    "find_c_star",
    "match_bfwcr_c",
]

# Coverage is monotone increasing in nu and numerically saturated at nu = 40
# (the remaining slack is below double precision), so this value realizes the
# attainable supremum of the family-wise coverage.
_NU_CAP = 40.0


class OptimizationError(RuntimeError):
    """The constrained solve is infeasible or failed to converge."""


class _StartFailed(Exception):
    """Internal: one starting point diverged; try the next one."""


@dataclass(frozen=True)
class LevelAllocation:
    """Solution of the level-allocation problem.

    ``nus`` are the per-unit half-width multipliers, ``alphas`` the matching
    two-sided levels ``2*(1 - Phi(nu))``, ``lagrange`` the multiplier of the
    coverage constraint and ``kkt_residual`` the final max of the stationarity
    and constraint residuals.
    """

    nus: np.ndarray
    alphas: np.ndarray
    lagrange: float
    kkt_residual: float


@dataclass(frozen=True)
class CStarResult:
    """Threshold search result.

    ``curve`` lists ``(C, brel)`` pairs over the searched grid in ascending
    ``C`` order, with ``nan`` marking grid points where the coverage
    constraint is unattainable.
    """

    c_star: float
    brel_at_cstar: float
    allocation: LevelAllocation
    curve: list


def default_c_grid() -> np.ndarray:
    """Threshold grid 0, 0.05, ..., 6 plus infinity (no thresholding)."""
    return np.concatenate([np.round(np.arange(121) * 0.05, 10), [np.inf]])


def _check_q(q: float) -> float:
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie strictly in (0, 1), got {q!r}")
    return q


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not (math.isfinite(beta) and beta > 0.0):
        raise ValueError(f"beta must be a finite positive value, got {beta!r}")
    return beta


def _bel_slope(C: float, sig: np.ndarray, tau: float) -> np.ndarray:
    """d bel / d nu per unit: 2*sigma*Phi(c_m)."""
    cms = np.minimum(_cm_many(C, sig, tau), _NU_CAP)
    return 2.0 * sig * norm_cdf(cms)


def _objective(nus: np.ndarray, C: float, sig: np.ndarray, tau: float, beta: float) -> float:
    bels = _bel_many(np.asarray(nus, dtype=float), C, sig, tau)
    return float(np.mean(bels / (beta + bels)))


def _log_coverage_sum(nus: np.ndarray, C: float, sig: np.ndarray, tau: float) -> float:
    p = _bcp_many(nus, C, sig, tau)
    if (p <= 0.0).any():
        return -math.inf
    return float(np.sum(np.log(p)))


def _coverage_cap(C: float, sig: np.ndarray, tau: float) -> float:
    """Supremum of sum(log bcp) over all allocations (attained as nu -> inf)."""
    return _log_coverage_sum(np.full(sig.shape, _NU_CAP), C, sig, tau)


def _equal_level_nu(C: float, sig: np.ndarray, tau: float, q: float) -> float:
    """Single nu applied to all units that meets the constraint exactly."""
    target = math.log1p(-q)

    def gap(v: float) -> float:
        return _log_coverage_sum(np.full(sig.shape, v), C, sig, tau) - target

    lo, hi = 1e-8, _NU_CAP
    g_lo = gap(lo)
    if g_lo >= 0.0:
        return lo
    return float(brentq(gap, lo, hi, xtol=1e-13, maxiter=200))


def _lambda_guess(nus: np.ndarray, C: float, sig: np.ndarray, tau: float, beta: float) -> float:
    M = sig.size
    p = _bcp_many(nus, C, sig, tau)
    pd = _bcp_dnu_many(nus, C, sig, tau)
    g = pd / p
    a = _bel_slope(C, sig, tau)
    fp = beta * a / (M * (beta + a * nus) ** 2)
    return float(np.mean(fp / g))


def _newton(
    nu0: np.ndarray,
    lam0: float,
    C: float,
    sig: np.ndarray,
    tau: float,
    q: float,
    beta: float,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, float]:
    M = sig.size
    target = math.log1p(-q)
    a = _bel_slope(C, sig, tau)
    nu = np.array(nu0, dtype=float)
    lam = float(lam0)
    for _ in range(max_iter):
        p = _bcp_many(nu, C, sig, tau)
        if (p <= 0.0).any() or not np.isfinite(p).all():
            raise _StartFailed
        g = _bcp_dnu_many(nu, C, sig, tau) / p
        gp = _bcp_d2nu_many(nu, C, sig, tau) / p - g * g
        denom = beta + a * nu
        fp = beta * a / (M * denom**2)
        fpp = -2.0 * beta * a * a / (M * denom**3)
        S = fp - lam * g
        G = float(np.sum(np.log(p)) - target)
        res = max(float(np.abs(S).max()), abs(G))
        if not math.isfinite(res):
            raise _StartFailed
        if res < tol:
            return nu, lam, res
        d = fpp - lam * gp
        if (d == 0.0).any() or not np.isfinite(d).all():
            raise _StartFailed
        gg_d = float(np.sum(g * g / d))
        if gg_d == 0.0 or not math.isfinite(gg_d):
            raise _StartFailed
        dlam = (-G + float(np.sum(g * S / d))) / gg_d
        dnu = (-S + g * dlam) / d
        step = 1.0
        shrink = dnu < 0.0
        if shrink.any():
            step = min(1.0, float(0.9 * np.min(nu[shrink] / -dnu[shrink])))
        if not (step > 0.0 and math.isfinite(step)):
            raise _StartFailed
        nu = nu + step * dnu
        lam = lam + step * dlam
    raise _StartFailed


def optimize_levels(
    C: float,
    sigmas: Sequence[float],
    tau: float,
    q: float,
    beta: float = 1000.0,
    warm_start: Optional[Union[LevelAllocation, tuple]] = None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> LevelAllocation:
    """Solve the level-allocation problem at threshold ``C``.

    Raises :class:`OptimizationError` when the family-wise coverage target is
    unattainable at this threshold (thresholding caps per-unit coverage below
    what the product needs) or when Newton fails from every starting point.
    ``warm_start`` may be a previous :class:`LevelAllocation` or a
    ``(nus, lagrange)`` pair.
    """
    sig = _as_sigma_array(sigmas)
    tau = _check_tau(tau)
    C = _check_threshold(C)
    q = _check_q(q)
    beta = _check_beta(beta)
    target = math.log1p(-q)

    cap = _coverage_cap(C, sig, tau)
    if cap < target:
        raise OptimizationError(
            f"family-wise coverage target {1.0 - q:.6g} is unattainable at "
            f"C={C:.6g}: the largest attainable value is {math.exp(cap):.6g}"
        )

    def _starts():
        if warm_start is not None:
            if isinstance(warm_start, LevelAllocation):
                yield np.array(warm_start.nus, dtype=float), float(warm_start.lagrange)
            else:
                nus0, lam0 = warm_start
                yield np.array(nus0, dtype=float), float(lam0)
        nu_s = np.full(sig.shape, sidak_nu(q, sig.size))
        yield nu_s, _lambda_guess(nu_s, C, sig, tau, beta)
        nu_eq = np.full(sig.shape, _equal_level_nu(C, sig, tau, q))
        yield nu_eq, _lambda_guess(nu_eq, C, sig, tau, beta)

    for nu0, lam0 in _starts():
        if (nu0 <= 0.0).any() or not np.isfinite(nu0).all():
            continue
        try:
            nu, lam, res = _newton(nu0, lam0, C, sig, tau, q, beta, tol, max_iter)
        except _StartFailed:
            continue
        alphas = 2.0 * (1.0 - norm_cdf(nu))
        return LevelAllocation(nus=nu, alphas=alphas, lagrange=lam, kkt_residual=res)
    raise OptimizationError(
        f"level allocation did not converge at C={C:.6g} from any starting point"
    )


def find_c_star(
    sigmas: Sequence[float],
    tau: float,
    q: float = 0.1,
    beta: float = 1000.0,
    c_grid: Optional[Sequence[float]] = None,
) -> CStarResult:
    """Search the threshold grid for the BREL-minimizing feasible threshold.

    The grid is scanned from the largest threshold downward so each solve can
    warm-start from its feasible neighbor; grid points where the coverage
    target is unattainable are recorded as ``nan`` in the curve.
    """
    sig = _as_sigma_array(sigmas)
    tau = _check_tau(tau)
    q = _check_q(q)
    beta = _check_beta(beta)
    if c_grid is None:
        grid = default_c_grid()
    else:
        grid = np.asarray(sorted({float(c) for c in c_grid}), dtype=float)
        if grid.size == 0:
            raise ValueError("c_grid must be non-empty")
        if np.isnan(grid).any() or (grid < 0.0).any():
            raise ValueError("every grid threshold must satisfy C >= 0")

    nu_ref = sidak_nu(q, sig.size)
    ref_total = nu_ref * 2.0 * float(np.sum(sig))

    brels = np.full(grid.size, math.nan)
    allocs: list = [None] * grid.size
    warm = None
    for i in range(grid.size - 1, -1, -1):
        try:
            alloc = optimize_levels(
                float(grid[i]), sig, tau, q, beta, warm_start=warm
            )
        except OptimizationError:
            continue
        allocs[i] = alloc
        bels = _bel_many(alloc.nus, float(grid[i]), sig, tau)
        brels[i] = float(np.sum(bels)) / ref_total
        warm = (alloc.nus, alloc.lagrange)

    if np.isnan(brels).all():
        raise OptimizationError(
            "the coverage target is unattainable on the whole threshold grid"
        )
    best = int(np.nanargmin(brels))
    curve = [(float(c), float(b)) for c, b in zip(grid, brels)]
    return CStarResult(
        c_star=float(grid[best]),
        brel_at_cstar=float(brels[best]),
        allocation=allocs[best],
        curve=curve,
    )


def match_bfwcr_c(
    sigmas_or_units: Sequence,
    tau: float,
    q: float,
    target_bfwcr: float,
    c_range: tuple = (0.0, 40.0),
    eta: float = 0.0,
    half_widths: Optional[Sequence[float]] = None,
) -> float:
    """Smallest threshold whose family-wise coverage reaches a target.

    Two input modes share one bisection.  A plain sequence of sigmas matches
    the model curve: the product of per-unit coverages at common Sidak-level
    multipliers, which increases in ``C`` toward ``1 - q``.  A sequence of
    :class:`UnitSpec` values carrying estimates matches the empirical curve:
    the fraction of units whose thresholded interval (thresholds at
    ``eta +/- C*tau``, half-widths ``half_widths`` or Sidak by default)
    covers zero.  Both curves are nondecreasing in ``C`` because raising the
    threshold only extends intervals.  Raises :class:`ValueError`, reporting
    the attainable range, when the target is not reached on ``c_range``.
    """
    tau = _check_tau(tau)
    q = _check_q(q)
    target_bfwcr = float(target_bfwcr)
    if not 0.0 < target_bfwcr <= 1.0:
        raise ValueError(
            f"target_bfwcr must lie in (0, 1], got {target_bfwcr!r}"
        )
    lo, hi = (float(c_range[0]), float(c_range[1]))
    if not (0.0 <= lo < hi and math.isfinite(hi)):
        raise ValueError(f"c_range must satisfy 0 <= lo < hi < inf, got {c_range!r}")

    items = list(sigmas_or_units)
    if any(isinstance(u, UnitSpec) for u in items):
        if not all(isinstance(u, UnitSpec) for u in items):
            raise ValueError("mixing UnitSpec and bare sigmas is not supported")
        if any(u.xbar is None for u in items):
            raise ValueError(
                "every UnitSpec needs an xbar to match the empirical curve"
            )
        sig = _as_sigma_array([u.sigma for u in items])
        xb = np.asarray([u.xbar for u in items], dtype=float)
        eta = float(eta)
        if not math.isfinite(eta):
            raise ValueError(f"eta must be finite, got {eta!r}")
        if half_widths is None:
            hw = sidak_nu(q, sig.size) * sig
        else:
            hw = np.asarray([float(h) for h in half_widths], dtype=float)
            if hw.shape != sig.shape:
                raise ValueError("half_widths must have one entry per unit")
            if not (np.isfinite(hw).all() and (hw > 0.0).all()):
                raise ValueError("every half-width must be finite and positive")

        def curve(C: float) -> float:
            lower = xb - hw * (xb > eta - C * tau)
            upper = xb + hw * (xb < eta + C * tau)
            return float(np.mean((lower <= 0.0) & (upper >= 0.0)))

    else:
        sig = _as_sigma_array(items)
        nus = np.full(sig.shape, sidak_nu(q, sig.size))

        def curve(C: float) -> float:
            total = _log_coverage_sum(nus, C, sig, tau)
            return math.exp(total) if math.isfinite(total) else 0.0

    thr = target_bfwcr - 1e-6
    f_lo, f_hi = curve(lo), curve(hi)
    if f_lo >= thr:
        return lo
    if f_hi < thr:
        raise ValueError(
            f"target_bfwcr {target_bfwcr:.6g} is unattainable on "
            f"c_range [{lo:.6g}, {hi:.6g}]: the curve spans "
            f"[{f_lo:.6g}, {f_hi:.6g}]"
        )
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if curve(mid) >= thr:
            hi = mid
        else:
            lo = mid
    return hi
