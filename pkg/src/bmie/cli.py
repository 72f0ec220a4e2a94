"""Command-line interface.

Every subcommand resolves its flags to a plain config dict, writes its
outputs under ``--out``, and records a ``manifest.json`` (subcommand, resolved
config, seed, version, timestamp) alongside them.  ``bmie rerun --manifest``
re-dispatches from a recorded manifest; all outputs are formatted
deterministically, so a rerun reproduces them byte for byte.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .estimators import (
    MieFamily,
    arcsine_unit,
    bie_thres,
    coverage_ratio,
    normal_scores,
)
from .hyperprior import ml2_estimate
from .ingest import DataError, load_batting, load_expression, select_period
from .measures import UnitSpec, global_measures, sidak_alpha, sidak_nu
from .optimizer import (
    OptimizationError,
    default_c_grid,
    find_c_star,
    match_bfwcr_c,
)
from .simulation import SimConfig, run_simulation, sigma_vector, summarize
from .statcore import NumericalError, t_quantile

__all__ = [
    "RunManifest",
    "cmd_curves",
    "cmd_optimize",
    "cmd_batting",
    "cmd_genes",
    "cmd_simulate",
    "cmd_rerun",
    "main",
    "main_entry",
]


@dataclass(frozen=True)
class RunManifest:
    """Record of one CLI run, sufficient to reproduce it exactly."""

    subcommand: str
    config: dict
    seed: Optional[int]
    version: str
    timestamp: str


_FAMILY_ALIASES = {
    "g0": "z_classical",
    "g1": "thresholded_prior",
    "g2": "thresholded_estimated",
    "g3": "credible_prior",
    "g4": "credible_estimated",
}

_CONFIG_KEYS = {
    "curves": ("M", "q", "tau", "C_grid", "sigma_spec", "seed", "out"),
    "optimize": ("M", "q", "beta", "tau", "C_grid", "sigma_spec", "seed", "out"),
    "batting": ("data", "period", "q", "beta", "C_grid", "out"),
    "genes": ("data", "group_split", "q", "rank_scope", "out"),
    "simulate": (
        "M",
        "q",
        "beta",
        "tau",
        "eta",
        "dist",
        "eta_star",
        "tau_star",
        "nrep",
        "seed",
        "families",
        "sigma_spec",
        "C_grid",
        "out",
    ),
}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(v)


def _write_tsv(path: Path, header, rows) -> None:
    lines = ["\t".join(header)]
    lines.extend("\t".join(_fmt(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _write_text(path: Path, text: str) -> None:
    path.write_text(text if text.endswith("\n") else text + "\n")


def _ensure_out(out) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _write_manifest(out_dir: Path, subcommand: str, args) -> None:
    config = {}
    for key in _CONFIG_KEYS[subcommand]:
        value = getattr(args, key)
        config[key] = str(value) if isinstance(value, Path) else value
    manifest = RunManifest(
        subcommand=subcommand,
        config=config,
        seed=getattr(args, "seed", None),
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    (out_dir / "manifest.json").write_text(
        json.dumps(dataclasses.asdict(manifest), indent=2, sort_keys=True) + "\n"
    )


def _parse_c_grid(text: Optional[str]):
    """Grid syntax: comma-separated floats, 'inf', or 'start:stop:step' ranges."""
    if text is None:
        return None
    vals = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if ":" in token:
            parts = token.split(":")
            if len(parts) != 3:
                raise ValueError(f"bad C range {token!r}; expected start:stop:step")
            start, stop, step = (float(p) for p in parts)
            if step <= 0.0 or stop < start:
                raise ValueError(f"bad C range {token!r}; need step > 0, stop >= start")
            count = int(round((stop - start) / step))
            vals.extend(
                round(start + i * step, 12)
                for i in range(count + 1)
                if start + i * step <= stop + 1e-12
            )
        elif token.lower() in ("inf", "infinity"):
            vals.append(math.inf)
        else:
            vals.append(float(token))
    if not vals:
        raise ValueError("the C grid is empty")
    return tuple(sorted(set(vals)))


def _parse_families(text: str):
    fams = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        name = _FAMILY_ALIASES.get(token, token)
        try:
            member = MieFamily(name)
        except ValueError:
            raise ValueError(
                f"unknown family {token!r}; valid: "
                f"{sorted(_FAMILY_ALIASES)} or {[m.value for m in MieFamily]}"
            ) from None
        if member not in fams:
            fams.append(member)
    if not fams:
        raise ValueError("--families must name at least one family")
    return tuple(fams)


def _parse_float_list(text: str, flag: str):
    try:
        vals = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ValueError(f"{flag} must be a comma-separated list of numbers") from None
    if not vals:
        raise ValueError(f"{flag} must list at least one value")
    return vals


def cmd_curves(args) -> int:
    out_dir = _ensure_out(args.out)
    rng = np.random.default_rng(args.seed)
    sig = sigma_vector(args.sigma_spec, args.M, rng=rng)
    grid = _parse_c_grid(args.C_grid)
    grid = default_c_grid() if grid is None else np.asarray(grid, dtype=float)
    nus = np.full(sig.size, sidak_nu(args.q, sig.size))
    rows = []
    for C in grid:
        gm = global_measures(nus, float(C), sig, args.tau, args.q)
        rows.append((float(C), gm.brel, gm.bfwcr, gm.btr, gm.bael))
    _write_tsv(out_dir / "curves.tsv", ("C", "brel", "bfwcr", "btr", "bael"), rows)
    _write_manifest(out_dir, "curves", args)
    print(
        f"wrote {len(rows)} grid rows (tau={args.tau:g}, M={args.M}) to "
        f"{out_dir / 'curves.tsv'}"
    )
    return 0


def cmd_optimize(args) -> int:
    out_dir = _ensure_out(args.out)
    rng = np.random.default_rng(args.seed)
    sig = sigma_vector(args.sigma_spec, args.M, rng=rng)
    result = find_c_star(
        sig, args.tau, args.q, args.beta, c_grid=_parse_c_grid(args.C_grid)
    )
    alloc = result.allocation
    gm = global_measures(alloc.nus, result.c_star, sig, args.tau, args.q)
    _write_tsv(out_dir / "brel_curve.tsv", ("C", "brel"), result.curve)
    _write_tsv(
        out_dir / "allocation.tsv",
        ("unit", "sigma", "nu", "alpha"),
        [
            (i, s, n, a)
            for i, (s, n, a) in enumerate(zip(sig, alloc.nus, alloc.alphas))
        ],
    )
    summary = "\n".join(
        [
            f"M\t{sig.size}",
            f"tau\t{_fmt(float(args.tau))}",
            f"q\t{_fmt(float(args.q))}",
            f"beta\t{_fmt(float(args.beta))}",
            f"c_star\t{_fmt(result.c_star)}",
            f"brel_at_cstar\t{_fmt(result.brel_at_cstar)}",
            f"bfwcr_at_cstar\t{_fmt(gm.bfwcr)}",
            f"btr_at_cstar\t{_fmt(gm.btr)}",
            f"bael_at_cstar\t{_fmt(gm.bael)}",
            f"lagrange\t{_fmt(alloc.lagrange)}",
            f"kkt_residual\t{_fmt(alloc.kkt_residual)}",
        ]
    )
    _write_text(out_dir / "optimize_summary.txt", summary)
    _write_manifest(out_dir, "optimize", args)
    print(
        f"c_star={_fmt(result.c_star)} brel={_fmt(result.brel_at_cstar)} "
        f"(tau={args.tau:g}, M={sig.size})"
    )
    return 0


def cmd_batting(args) -> int:
    out_dir = _ensure_out(args.out)
    records = load_batting(args.data)
    splits = select_period(records, args.period)
    if len(splits) < 2:
        raise DataError(
            f"only {len(splits)} player(s) remain after screening; need at least 2"
        )
    units = [arcsine_unit(s.hits_first, s.at_bats_first) for s in splits]
    truths = [arcsine_unit(s.hits_rest, s.at_bats_rest).xbar for s in splits]
    xs = np.asarray([u.xbar for u in units])
    sigs = np.asarray([u.sigma for u in units])

    fit = ml2_estimate(xs, sigs)
    eta_hat, tau_hat = fit.prior.eta, fit.prior.tau
    result = find_c_star(
        sigs, tau_hat, args.q, args.beta, c_grid=_parse_c_grid(args.C_grid)
    )
    alloc = result.allocation
    intervals = [
        bie_thres(x, nu, s, result.c_star, eta_hat, tau_hat)
        for x, nu, s in zip(xs, alloc.nus, sigs)
    ]
    gm = global_measures(alloc.nus, result.c_star, sigs, tau_hat, args.q)
    emp_coverage = coverage_ratio(intervals, truths)
    one_sided = [iv.thresholded_left or iv.thresholded_right for iv in intervals]
    nu_ref = sidak_nu(args.q, sigs.size)
    realized_rel = sum(iv.length for iv in intervals) / (
        2.0 * nu_ref * float(np.sum(sigs))
    )

    _write_tsv(
        out_dir / "batting_units.tsv",
        (
            "player_id",
            "at_bats_first",
            "xbar",
            "sigma",
            "nu",
            "lower",
            "upper",
            "one_sided",
            "truth_rest",
            "covered",
        ),
        [
            (
                s.player_id,
                s.at_bats_first,
                u.xbar,
                u.sigma,
                float(nu),
                iv.lower,
                iv.upper,
                flag,
                t,
                iv.covers(t),
            )
            for s, u, nu, iv, flag, t in zip(
                splits, units, alloc.nus, intervals, one_sided, truths
            )
        ],
    )
    summary = "\n".join(
        [
            f"players\t{len(splits)}",
            f"period\t{args.period}",
            f"eta_hat\t{_fmt(eta_hat)}",
            f"tau_hat\t{_fmt(tau_hat)}",
            f"tau_floored\t{_fmt(fit.tau_floored)}",
            f"ml2_converged\t{_fmt(fit.converged)}",
            f"c_star\t{_fmt(result.c_star)}",
            f"model_brel\t{_fmt(result.brel_at_cstar)}",
            f"model_bfwcr\t{_fmt(gm.bfwcr)}",
            f"model_btr\t{_fmt(gm.btr)}",
            f"empirical_coverage\t{_fmt(emp_coverage)}",
            f"all_covered\t{_fmt(emp_coverage == 1.0)}",
            f"realized_relative_length\t{_fmt(realized_rel)}",
            f"realized_one_sided_rate\t{_fmt(sum(one_sided) / len(one_sided))}",
        ]
    )
    _write_text(out_dir / "batting_summary.txt", summary)
    _write_manifest(out_dir, "batting", args)
    print(
        f"players={len(splits)} eta_hat={_fmt(eta_hat)} tau_hat={_fmt(tau_hat)} "
        f"c_star={_fmt(result.c_star)} brel={_fmt(result.brel_at_cstar)} "
        f"empirical_coverage={_fmt(emp_coverage)}"
    )
    return 0


def cmd_genes(args) -> int:
    out_dir = _ensure_out(args.out)
    mat = load_expression(args.data, args.group_split)
    n1 = mat.group_split
    n2 = len(mat.samples) - n1
    if n1 < 2 or n2 < 2:
        raise DataError(
            f"each group needs at least 2 samples, got {n1} and {n2}"
        )
    scores = normal_scores(mat.values, rank_scope=args.rank_scope)
    g1, g2 = scores[:, :n1], scores[:, n1:]
    xbar = g1.mean(axis=1) - g2.mean(axis=1)
    df = n1 + n2 - 2
    ss = ((g1 - g1.mean(axis=1, keepdims=True)) ** 2).sum(axis=1) + (
        (g2 - g2.mean(axis=1, keepdims=True)) ** 2
    ).sum(axis=1)
    sp = np.sqrt(ss / df)
    if (sp <= 0.0).any():
        bad = mat.genes[int(np.argmax(sp <= 0.0))]
        raise DataError(
            f"gene {bad!r} has zero pooled variance after the score transform"
        )
    se = sp * math.sqrt(1.0 / n1 + 1.0 / n2)

    fit = ml2_estimate(xbar, se)
    eta_hat, tau_hat = fit.prior.eta, fit.prior.tau
    n_genes = len(mat.genes)
    alpha_s = sidak_alpha(args.q, n_genes)
    t_hw = t_quantile(1.0 - alpha_s / 2.0, df) * se
    target = float(np.mean((xbar - t_hw <= 0.0) & (xbar + t_hw >= 0.0)))
    units = [UnitSpec(sigma=float(s), xbar=float(x)) for s, x in zip(se, xbar)]
    c_star = match_bfwcr_c(
        units, tau_hat, args.q, target, eta=eta_hat, half_widths=t_hw
    )

    keep_low = xbar > eta_hat - c_star * tau_hat
    keep_high = xbar < eta_hat + c_star * tau_hat
    lower = xbar - t_hw * keep_low
    upper = xbar + t_hw * keep_high
    one_sided = ~(keep_low & keep_high)
    btr_hat = float(np.mean(one_sided))
    sides_kept = keep_low.astype(float) + keep_high.astype(float)
    brel_hat = float(np.sum(t_hw * sides_kept) / (2.0 * np.sum(t_hw)))

    _write_tsv(
        out_dir / "genes_units.tsv",
        ("gene", "xbar", "se", "lower", "upper", "one_sided", "covers_zero"),
        [
            (
                gene,
                float(x),
                float(s),
                float(lo),
                float(up),
                bool(flag),
                bool(lo <= 0.0 <= up),
            )
            for gene, x, s, lo, up, flag in zip(
                mat.genes, xbar, se, lower, upper, one_sided
            )
        ],
    )
    summary = "\n".join(
        [
            f"genes\t{n_genes}",
            f"group_sizes\t{n1},{n2}",
            f"rank_scope\t{args.rank_scope}",
            f"eta_hat\t{_fmt(eta_hat)}",
            f"tau_hat\t{_fmt(tau_hat)}",
            f"tau_floored\t{_fmt(fit.tau_floored)}",
            f"target_coverage\t{_fmt(target)}",
            f"c_star\t{_fmt(c_star)}",
            f"realized_brel\t{_fmt(brel_hat)}",
            f"realized_btr\t{_fmt(btr_hat)}",
        ]
    )
    _write_text(out_dir / "genes_summary.txt", summary)
    _write_manifest(out_dir, "genes", args)
    print(
        f"genes={n_genes} eta_hat={_fmt(eta_hat)} tau_hat={_fmt(tau_hat)} "
        f"c_star={_fmt(c_star)} realized_brel={_fmt(brel_hat)} "
        f"realized_btr={_fmt(btr_hat)}"
    )
    return 0


def cmd_simulate(args) -> int:
    out_dir = _ensure_out(args.out)
    config = SimConfig(
        M=args.M,
        n_rep=args.nrep,
        q=args.q,
        sigma_law=args.sigma_spec,
        true_dist=args.dist,
        eta_star=args.eta_star,
        tau_star=args.tau_star,
        prior_grid=(
            _parse_float_list(args.eta, "--eta"),
            _parse_float_list(args.tau, "--tau"),
        ),
        families=_parse_families(args.families),
        seed=args.seed,
        beta=args.beta,
        c_grid=_parse_c_grid(args.C_grid),
    )
    cells = run_simulation(config)
    _write_tsv(
        out_dir / "simulation_cells.tsv",
        ("family", "eta", "tau", "mean_coverage", "mean_content", "mc_se_coverage"),
        [
            (c.family, c.eta, c.tau, c.mean_coverage, c.mean_content, c.mc_se_coverage)
            for c in cells
        ],
    )
    text = summarize(cells)
    _write_text(out_dir / "simulation_summary.txt", text)
    _write_manifest(out_dir, "simulate", args)
    print(text, end="")
    return 0


def cmd_rerun(args) -> int:
    try:
        raw = Path(args.manifest).read_text()
    except OSError as exc:
        raise DataError(f"cannot read manifest {args.manifest!r}: {exc}") from None
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"manifest {args.manifest!r} is not valid JSON: {exc}") from None
    for key in ("subcommand", "config"):
        if key not in manifest:
            raise ValueError(f"manifest {args.manifest!r} lacks the {key!r} entry")
    sub = manifest["subcommand"]
    if sub not in _CONFIG_KEYS:
        raise ValueError(f"manifest names unknown subcommand {sub!r}")
    config = dict(manifest["config"])
    missing = [k for k in _CONFIG_KEYS[sub] if k not in config]
    if missing:
        raise ValueError(f"manifest config lacks keys: {', '.join(missing)}")
    if args.out is not None:
        config["out"] = args.out
    ns = argparse.Namespace(**config)
    return _DISPATCH[sub](ns)


_DISPATCH = {
    "curves": cmd_curves,
    "optimize": cmd_optimize,
    "batting": cmd_batting,
    "genes": cmd_genes,
    "simulate": cmd_simulate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bmie",
        description=(
            "Thresholded Bayes multiple interval estimation: performance "
            "curves, level optimization, data applications and simulation."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    c = sub.add_parser(
        "curves", help="global measures along the threshold grid at Sidak levels"
    )
    c.add_argument("--M", type=int, default=1000, help="number of units")
    c.add_argument("--q", type=float, default=0.1, help="family-wise error target")
    c.add_argument("--tau", type=float, default=2.0, help="prior standard deviation")
    c.add_argument(
        "--C-grid",
        dest="C_grid",
        default=None,
        help="thresholds: floats, 'inf', or start:stop:step (default 0:6:0.05,inf)",
    )
    c.add_argument(
        "--sigma-spec",
        dest="sigma_spec",
        default="linspace(0.01,10)",
        help="unit scales: uniform(lo,hi), linspace(lo,hi) or list:v1,v2,...",
    )
    c.add_argument("--seed", type=int, default=0, help="seed for random sigma specs")
    c.add_argument("--out", default=".", help="output directory")
    c.set_defaults(func=cmd_curves)

    o = sub.add_parser("optimize", help="optimize levels and search the threshold")
    o.add_argument("--M", type=int, default=1000, help="number of units")
    o.add_argument("--q", type=float, default=0.1, help="family-wise error target")
    o.add_argument("--beta", type=float, default=1000.0, help="length-loss scale")
    o.add_argument("--tau", type=float, default=2.0, help="prior standard deviation")
    o.add_argument("--C-grid", dest="C_grid", default=None, help="threshold grid")
    o.add_argument(
        "--sigma-spec", dest="sigma_spec", default="linspace(0.01,10)",
        help="unit scales: uniform(lo,hi), linspace(lo,hi) or list:v1,v2,...",
    )
    o.add_argument("--seed", type=int, default=0, help="seed for random sigma specs")
    o.add_argument("--out", default=".", help="output directory")
    o.set_defaults(func=cmd_optimize)

    b = sub.add_parser("batting", help="batting-average application")
    b.add_argument("--data", required=True, help="batting CSV path")
    b.add_argument(
        "--period", type=int, default=1, help="months <= period form the estimation data"
    )
    b.add_argument("--q", type=float, default=0.1, help="family-wise error target")
    b.add_argument("--beta", type=float, default=1000.0, help="length-loss scale")
    b.add_argument("--C-grid", dest="C_grid", default=None, help="threshold grid")
    b.add_argument("--out", default=".", help="output directory")
    b.set_defaults(func=cmd_batting)

    g = sub.add_parser("genes", help="gene-expression application")
    g.add_argument("--data", required=True, help="expression matrix path")
    g.add_argument(
        "--group-split",
        dest="group_split",
        type=int,
        required=True,
        help="number of leading sample columns in group 1",
    )
    g.add_argument("--q", type=float, default=0.1, help="family-wise error target")
    g.add_argument(
        "--rank-scope",
        dest="rank_scope",
        choices=("matrix", "row"),
        default="matrix",
        help="rank the score transform over the whole matrix or per row",
    )
    g.add_argument("--out", default=".", help="output directory")
    g.set_defaults(func=cmd_genes)

    s = sub.add_parser("simulate", help="prior-misspecification study")
    s.add_argument("--M", type=int, default=1000, help="units per replication")
    s.add_argument("--q", type=float, default=0.1, help="family-wise error target")
    s.add_argument("--beta", type=float, default=1000.0, help="length-loss scale")
    s.add_argument(
        "--eta", default="0,2,4,6", help="comma-separated prior-grid means"
    )
    s.add_argument(
        "--tau", default="1,2,3", help="comma-separated prior-grid standard deviations"
    )
    s.add_argument(
        "--dist",
        choices=("normal", "uniform", "logistic", "exponential"),
        default="normal",
        help="true location law",
    )
    s.add_argument("--eta-star", dest="eta_star", type=float, default=0.0,
                   help="true location mean")
    s.add_argument("--tau-star", dest="tau_star", type=float, default=2.0,
                   help="true location standard deviation")
    s.add_argument("--nrep", type=int, default=1000, help="number of replications")
    s.add_argument("--seed", type=int, default=0, help="root seed")
    s.add_argument(
        "--families",
        default="g0,g1,g2,g3,g4",
        help="comma-separated families (g0..g4 or full names)",
    )
    s.add_argument(
        "--sigma-spec", dest="sigma_spec", default="uniform(0.01,10)",
        help="per-replication unit scales",
    )
    s.add_argument("--C-grid", dest="C_grid", default=None,
                   help="threshold grid for the per-replication search")
    s.add_argument("--out", default=".", help="output directory")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rerun", help="re-run a recorded manifest")
    r.add_argument("--manifest", required=True, help="path to manifest.json")
    r.add_argument("--out", default=None, help="override the recorded output directory")
    r.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0
    try:
        return int(args.func(args) or 0)
    except DataError as exc:
        print(f"bmie: data error: {exc}", file=sys.stderr)
        return 3
    except (OptimizationError, NumericalError) as exc:
        print(f"bmie: numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"bmie: data error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, TypeError) as exc:
        print(f"bmie: error: {exc}", file=sys.stderr)
        return 2


def main_entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    main_entry()
