"""Monte Carlo moments, tail exponents and integrability checks of X₀, X₁, δ."""

from .bounds import (
    cell_masses,
    check_X0_norm_bound,
    check_X1_implies_X0,
    pair_small_ball_probability,
    x0_norm_series,
    x0_tail_lower_bound,
    x1_integrability_series,
)
from .estimators import (
    estimate_moment,
    moment_from_sample,
    moment_stability,
    summarize,
    tail_exponent,
    tail_fit_from_values,
    z_value,
)
from .models import (
    BoundReport,
    CellMasses,
    MomentEstimate,
    OriginSample,
    SeedManifest,
    StabilityReport,
    Statistic,
    TailFit,
)
from .origin import origin_block, origin_statistics, sample_origin

__all__ = [
    "BoundReport",
    "CellMasses",
    "MomentEstimate",
    "OriginSample",
    "SeedManifest",
    "StabilityReport",
    "Statistic",
    "TailFit",
    "cell_masses",
    "check_X0_norm_bound",
    "check_X1_implies_X0",
    "estimate_moment",
    "moment_from_sample",
    "moment_stability",
    "origin_block",
    "origin_statistics",
    "pair_small_ball_probability",
    "sample_origin",
    "summarize",
    "tail_exponent",
    "tail_fit_from_values",
    "x0_norm_series",
    "x0_tail_lower_bound",
    "x1_integrability_series",
    "z_value",
]
