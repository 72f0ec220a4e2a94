"""Monte-Carlo study of interval families under prior misspecification.

Each replication draws unit scales, true locations from the *true* law, and
observed estimates; fits the prior by marginal maximum likelihood when a
family needs it; optimizes the threshold and levels once per replication from
the fitted scale; and then evaluates every requested family against every
prior cell on the (eta, tau) grid.  The truth never changes across the grid;
the grid varies only the prior handed to the prior-using families, so the
study isolates the cost of misspecifying it.

Replications use independent child streams spawned from the seed, and results
are reduced in replication order, so output is identical for any worker
count.  The ``BMIE_THREADS`` environment variable caps the worker pool.
"""

from __future__ import annotations

import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .estimators import MieFamily
from .hyperprior import ml2_estimate
from .measures import sidak_nu
from .optimizer import find_c_star

__all__ = [
    "DEFAULT_PRIOR_GRID",
    "SimConfig",
    "SimCell",
    "sample_mu",
    "sigma_vector",
    "run_simulation",
    "summarize",
]

DEFAULT_PRIOR_GRID = ((0.0, 2.0, 4.0, 6.0), (1.0, 2.0, 3.0))

_DISTS = ("normal", "uniform", "logistic", "exponential")


@dataclass(frozen=True)
class SimConfig:
    """Resolved configuration of one simulation run."""

    M: int = 1000
    n_rep: int = 1000
    q: float = 0.1
    sigma_law: str = "uniform(0.01,10)"
    true_dist: str = "normal"
    eta_star: float = 0.0
    tau_star: float = 2.0
    prior_grid: tuple = DEFAULT_PRIOR_GRID
    families: tuple = tuple(MieFamily)
    seed: int = 0
    beta: float = 1000.0
    c_grid: Optional[tuple] = None


@dataclass(frozen=True)
class SimCell:
    """Aggregated results for one (family, prior cell) combination.

    ``mean_coverage`` is the fraction of replications in which *all* units
    were covered simultaneously; ``mean_content`` is the average total length
    relative to the classical family; ``mc_se_coverage`` is the binomial
    Monte-Carlo standard error of the coverage estimate.
    """

    family: str
    eta: float
    tau: float
    mean_coverage: float
    mean_content: float
    mc_se_coverage: float


def sample_mu(
    rng: np.random.Generator,
    dist: str,
    eta_star: float,
    tau_star: float,
    size: int,
) -> np.ndarray:
    """Draw true locations with mean ``eta_star`` and sd ``tau_star``.

    Every supported law is centered and scaled to the same first two moments
    so the normal-prior fit is misspecified in shape only: ``uniform`` on
    ``eta_star +/- sqrt(3)*tau_star``; ``logistic`` with scale
    ``tau_star*sqrt(3)/pi``; ``exponential`` with rate ``1/tau_star`` shifted
    to start at ``eta_star - tau_star``.
    """
    eta_star = float(eta_star)
    tau_star = float(tau_star)
    if not math.isfinite(eta_star):
        raise ValueError(f"eta_star must be finite, got {eta_star!r}")
    if not (math.isfinite(tau_star) and tau_star > 0.0):
        raise ValueError(f"tau_star must be a finite positive value, got {tau_star!r}")
    size = int(size)
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size!r}")
    if dist == "normal":
        return rng.normal(eta_star, tau_star, size)
    if dist == "uniform":
        h = math.sqrt(3.0) * tau_star
        return rng.uniform(eta_star - h, eta_star + h, size)
    if dist == "logistic":
        return rng.logistic(eta_star, tau_star * math.sqrt(3.0) / math.pi, size)
    if dist == "exponential":
        return eta_star - tau_star + rng.exponential(tau_star, size)
    raise ValueError(f"true_dist must be one of {_DISTS}, got {dist!r}")


_SPEC_RE = re.compile(r"^(uniform|linspace)\(\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)$")


def sigma_vector(
    spec: str, M: int, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """Materialize a sigma specification string into ``M`` positive scales.

    Supported forms: ``uniform(lo,hi)`` (random, needs ``rng``),
    ``linspace(lo,hi)`` (deterministic equi-spaced), and ``list:v1,v2,...``
    (explicit values, length must equal ``M``).
    """
    M = int(M)
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M!r}")
    spec = spec.strip()
    if spec.startswith("list:"):
        vals = np.asarray([float(v) for v in spec[5:].split(",")], dtype=float)
        if vals.size != M:
            raise ValueError(
                f"sigma list has {vals.size} values but M={M} were requested"
            )
        if not (np.isfinite(vals).all() and (vals > 0.0).all()):
            raise ValueError("every listed sigma must be finite and positive")
        return vals
    m = _SPEC_RE.match(spec)
    if m is None:
        raise ValueError(
            f"unrecognized sigma spec {spec!r}; expected uniform(lo,hi), "
            "linspace(lo,hi) or list:v1,v2,..."
        )
    kind, lo, hi = m.group(1), float(m.group(2)), float(m.group(3))
    if not (math.isfinite(lo) and math.isfinite(hi) and 0.0 < lo < hi):
        raise ValueError(f"sigma spec needs 0 < lo < hi, got {spec!r}")
    if kind == "linspace":
        return np.linspace(lo, hi, M)
    if rng is None:
        raise ValueError("sigma spec uniform(lo,hi) requires a random generator")
    return rng.uniform(lo, hi, M)


def _worker_count() -> int:
    avail = os.cpu_count() or 1
    raw = os.environ.get("BMIE_THREADS")
    if raw is None or raw.strip() == "":
        return avail
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(
            f"BMIE_THREADS must be a positive integer, got {raw!r}"
        ) from None
    if cap < 1:
        raise ValueError(f"BMIE_THREADS must be a positive integer, got {raw!r}")
    return min(avail, cap)


def _normalize_families(families) -> list[MieFamily]:
    out: list[MieFamily] = []
    for fam in families:
        if isinstance(fam, MieFamily):
            member = fam
        else:
            try:
                member = MieFamily(str(fam))
            except ValueError:
                raise ValueError(
                    f"unknown family {fam!r}; valid values: "
                    f"{[m.value for m in MieFamily]}"
                ) from None
        if member not in out:
            out.append(member)
    if not out:
        raise ValueError("families must name at least one interval family")
    return out


def _thresholded_bounds(x, hw, C, eta, tau):
    keep_low = x > eta - C * tau
    keep_high = x < eta + C * tau
    return x - hw * keep_low, x + hw * keep_high


def _credible_bounds(x, sig, nu, eta, tau):
    t2 = tau * tau
    s2 = sig * sig
    center = (t2 * x + s2 * eta) / (s2 + t2)
    hw = nu * sig * tau / np.sqrt(s2 + t2)
    return center - hw, center + hw


def run_simulation(config: SimConfig) -> list[SimCell]:
    """Run the study and return one :class:`SimCell` per (tau, family, eta)."""
    M = int(config.M)
    n_rep = int(config.n_rep)
    if M < 2:
        raise ValueError(f"M must be >= 2, got {config.M!r}")
    if n_rep < 1:
        raise ValueError(f"n_rep must be >= 1, got {config.n_rep!r}")
    q = float(config.q)
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie strictly in (0, 1), got {config.q!r}")
    if config.true_dist not in _DISTS:
        raise ValueError(
            f"true_dist must be one of {_DISTS}, got {config.true_dist!r}"
        )
    etas, taus = config.prior_grid
    etas = [float(e) for e in etas]
    taus = [float(t) for t in taus]
    if not etas or not taus:
        raise ValueError("prior_grid needs at least one eta and one tau")
    if any(not math.isfinite(e) for e in etas):
        raise ValueError("every prior-grid eta must be finite")
    if any(not (math.isfinite(t) and t > 0.0) for t in taus):
        raise ValueError("every prior-grid tau must be finite and positive")
    fams = _normalize_families(config.families)

    need_fit = bool(
        {
            MieFamily.THRESHOLDED_PRIOR,
            MieFamily.THRESHOLDED_ESTIMATED,
            MieFamily.CREDIBLE_ESTIMATED,
        }
        & set(fams)
    )
    need_opt = bool(
        {MieFamily.THRESHOLDED_PRIOR, MieFamily.THRESHOLDED_ESTIMATED} & set(fams)
    )

    nu_s = sidak_nu(q, M)
    n_f, n_e, n_t = len(fams), len(etas), len(taus)
    children = np.random.SeedSequence(int(config.seed)).spawn(n_rep)

    def one_rep(k: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(children[k])
        sig = sigma_vector(config.sigma_law, M, rng=rng)
        mu = sample_mu(rng, config.true_dist, config.eta_star, config.tau_star, M)
        x = rng.normal(mu, sig)

        ref_total = 2.0 * nu_s * float(np.sum(sig))
        if need_fit:
            fit = ml2_estimate(x, sig)
            eta_hat, tau_hat = fit.prior.eta, fit.prior.tau
        if need_opt:
            search = find_c_star(sig, tau_hat, q, config.beta, c_grid=config.c_grid)
            c_star = search.c_star
            hw_opt = search.allocation.nus * sig

        cov = np.empty((n_f, n_e, n_t))
        cont = np.empty((n_f, n_e, n_t))

        def record(fi, ei, ti, lower, upper):
            cov[fi, ei, ti] = float(np.all((lower <= mu) & (mu <= upper)))
            cont[fi, ei, ti] = float(np.sum(upper - lower)) / ref_total

        for fi, fam in enumerate(fams):
            if fam is MieFamily.Z_CLASSICAL:
                record(fi, 0, 0, x - nu_s * sig, x + nu_s * sig)
                cov[fi, :, :] = cov[fi, 0, 0]
                cont[fi, :, :] = cont[fi, 0, 0]
            elif fam is MieFamily.THRESHOLDED_ESTIMATED:
                lo, up = _thresholded_bounds(x, hw_opt, c_star, eta_hat, tau_hat)
                record(fi, 0, 0, lo, up)
                cov[fi, :, :] = cov[fi, 0, 0]
                cont[fi, :, :] = cont[fi, 0, 0]
            elif fam is MieFamily.CREDIBLE_ESTIMATED:
                lo, up = _credible_bounds(x, sig, nu_s, eta_hat, tau_hat)
                record(fi, 0, 0, lo, up)
                cov[fi, :, :] = cov[fi, 0, 0]
                cont[fi, :, :] = cont[fi, 0, 0]
            elif fam is MieFamily.THRESHOLDED_PRIOR:
                for ei, eta in enumerate(etas):
                    for ti, tau in enumerate(taus):
                        lo, up = _thresholded_bounds(x, hw_opt, c_star, eta, tau)
                        record(fi, ei, ti, lo, up)
            else:
                for ei, eta in enumerate(etas):
                    for ti, tau in enumerate(taus):
                        lo, up = _credible_bounds(x, sig, nu_s, eta, tau)
                        record(fi, ei, ti, lo, up)
        return cov, cont

    cov_all = np.empty((n_rep, n_f, n_e, n_t))
    cont_all = np.empty((n_rep, n_f, n_e, n_t))
    workers = _worker_count()
    if workers <= 1 or n_rep == 1:
        for k in range(n_rep):
            cov_all[k], cont_all[k] = one_rep(k)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for k, (cov_k, cont_k) in enumerate(pool.map(one_rep, range(n_rep))):
                cov_all[k] = cov_k
                cont_all[k] = cont_k

    cells = []
    for ti, tau in enumerate(taus):
        for fi, fam in enumerate(fams):
            for ei, eta in enumerate(etas):
                p = float(np.mean(cov_all[:, fi, ei, ti]))
                cells.append(
                    SimCell(
                        family=fam.value,
                        eta=eta,
                        tau=tau,
                        mean_coverage=p,
                        mean_content=float(np.mean(cont_all[:, fi, ei, ti])),
                        mc_se_coverage=math.sqrt(p * (1.0 - p) / n_rep),
                    )
                )
    return cells


def summarize(cells: Sequence[SimCell]) -> str:
    """Text table: one block per prior tau, families by row, etas by column."""
    cells = list(cells)
    if not cells:
        raise ValueError("need at least one cell")
    taus = sorted({c.tau for c in cells})
    etas = sorted({c.eta for c in cells})
    families: list[str] = []
    for c in cells:
        if c.family not in families:
            families.append(c.family)
    index = {(c.family, c.eta, c.tau): c for c in cells}

    lines = []
    for tau in taus:
        lines.append(f"prior tau = {tau:g}")
        header = f"{'family':<22} {'measure':<9}"
        for eta in etas:
            header += f" {f'eta={eta:g}':>10}"
        lines.append(header)
        for fam in families:
            for measure in ("coverage", "content"):
                row = f"{fam:<22} {measure:<9}"
                for eta in etas:
                    cell = index.get((fam, eta, tau))
                    if cell is None:
                        row += f" {'-':>10}"
                    elif measure == "coverage":
                        row += f" {cell.mean_coverage:>10.3f}"
                    else:
                        row += f" {cell.mean_content:>10.3f}"
                lines.append(row)
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
