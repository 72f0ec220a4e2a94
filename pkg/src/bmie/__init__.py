"""Thresholded Bayes multiple interval estimation for normal location parameters.

The library constructs simultaneous interval estimators for many normal means
that borrow strength through a common normal prior: the outer tail of each
interval (the side pointing away from the prior mean) is dropped whenever the
observed estimate falls outside a threshold band around the prior mean.  It
provides exact performance measures for that construction, marginal
maximum-likelihood estimation of the prior, constrained optimization of the
per-interval levels and of the threshold, competing classical and credible
constructions, a Monte-Carlo misspecification study, and a CLI.
"""

from .statcore import (
    NumericalError,
    QuadKind,
    QuadratureRule,
    adaptive_rule,
    gauss_rule,
    integrate_dPhi,
    norm_cdf,
    norm_pdf,
    norm_quantile,
    t_quantile,
)
from .measures import (
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
from .hyperprior import Ml2Result, ml2_estimate
from .optimizer import (
    CStarResult,
    LevelAllocation,
    OptimizationError,
    default_c_grid,
    find_c_star,
    match_bfwcr_c,
    optimize_levels,
)
from .estimators import (
    Interval,
    MieFamily,
    arcsine_unit,
    bie_thres,
    coverage_ratio,
    credible_mie,
    normal_scores,
    relative_content,
    t_thres,
    z_mie,
)
from .simulation import SimCell, SimConfig, run_simulation, sample_mu, summarize
from .ingest import (
    BattingRecord,
    DataError,
    ExpressionMatrix,
    load_batting,
    load_expression,
    select_period,
)

__version__ = "0.1.0"

_FAMILY_CLASSES = ("BaseMie", "ZClassicalMie", "ThresholdedMie", "CredibleMie")


def __getattr__(name):
    # The estimator-object wrappers pull in scikit-learn; import them lazily so
    # plain library use does not pay for it.
    if name in _FAMILY_CLASSES:
        from . import families

        return getattr(families, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
