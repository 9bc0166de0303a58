"""Monte Carlo moment, tail and stability estimators.

All estimators draw replicas from the shared origin stream of the master
seed (see ``origin.sample_origin``), so two estimates with the same seed
see the same realizations ω. Reductions run over replicas in order.

Key functions:
    estimate_moment: E(statistic^p) with a CLT confidence interval.
    tail_exponent: Log-log slope of exceedance or small-ball probabilities.
    moment_stability: CI widths over nested replica prefixes.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import stats

from ..config import get_config
from ..exceptions import EstimationError
from ..nuclei.models import ModelSpec, VacancyCharge
from .models import MomentEstimate, OriginSample, SeedManifest, Statistic, StabilityReport, TailFit
from .origin import ORIGIN_STREAM, sample_origin

logger = structlog.get_logger("thermolimit.moments")

MIN_REPLICAS = 30
MIN_TAIL_POINTS = 4
# A moment is called stable when its CI shrinks by at least this share of 1/sqrt(n)
STABLE_FRACTION = 0.3


def z_value(level: float) -> float:
    """Two-sided normal quantile for a confidence level."""
    if not 0 < level < 1:
        raise EstimationError("confidence level must lie in (0, 1)", level=level)
    return float(stats.norm.ppf(0.5 + level / 2.0))


def summarize(values: np.ndarray, level: float) -> Tuple[float, float, float, float]:
    """(mean, stderr, lo, hi) of a sample."""
    n = values.shape[0]
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    half = z_value(level) * stderr
    return mean, stderr, mean - half, mean + half


def _check_statistic(model: ModelSpec, statistic: Statistic) -> None:
    if statistic.per_nucleus and isinstance(model.charge, VacancyCharge):
        raise EstimationError(
            "per-nucleus statistics at the origin are undefined for laws with vacancies",
            statistic=statistic.label,
        )


def _manifest(model: ModelSpec, seed: int, sample: OriginSample) -> SeedManifest:
    return SeedManifest(
        master_seed=int(seed),
        stream=ORIGIN_STREAM,
        replicas=sample.replicas,
        neighborhood=sample.neighborhood,
        tail_cutoff=model.tail_cutoff,
    )


def moment_from_sample(
    model: ModelSpec,
    sample: OriginSample,
    statistic: Statistic,
    p: float,
    seed: int,
    level: Optional[float] = None,
) -> MomentEstimate:
    """E(statistic^p) from already drawn replicas."""
    level = get_config().confidence_level if level is None else level
    values = sample.values(statistic)
    if statistic.per_nucleus:
        # site 0 is always occupied for non-vacancy lattice laws; Poisson
        # replicas without any point contribute 0 (empty-sum convention)
        values = np.nan_to_num(values, nan=0.0, posinf=0.0)
    powered = values ** p
    mean, stderr, lo, hi = summarize(powered, level)
    return MomentEstimate(
        statistic=statistic.label,
        exponent=float(p),
        replicas=sample.replicas,
        mean=mean,
        stderr=stderr,
        level=level,
        lo=min(lo, mean),
        hi=max(hi, mean),
        seeds=_manifest(model, seed, sample),
    )


def estimate_moment(
    model: ModelSpec,
    statistic,
    p: float,
    replicas: int,
    seed: int,
    level: Optional[float] = None,
    threads: Optional[int] = None,
    neighborhood: Optional[int] = None,
) -> MomentEstimate:
    """Sample mean of statistic^p at the origin cell over independent replicas.

    Args:
        model: Nuclear model.
        statistic: A Statistic or its text form (``"X0"``, ``"Xp(2,0.5)"``).
        p: Exponent (> 0).
        replicas: Number of replicas (≥ 30).
        seed: Master seed.
        level: Confidence level (default from settings).
        threads: Worker threads (results do not depend on it).
        neighborhood: Chebyshev radius of the sampled site block.

    Raises:
        EstimationError: too few replicas, p ≤ 0, or a per-nucleus
            statistic on a vacancy law.
    """
    statistic = Statistic.parse(statistic)
    if replicas < MIN_REPLICAS:
        raise EstimationError(
            f"at least {MIN_REPLICAS} replicas are required", replicas=replicas
        )
    if not p > 0:
        raise EstimationError("exponent p must be > 0", p=p)
    _check_statistic(model, statistic)

    sample = sample_origin(model, replicas, seed, neighborhood=neighborhood, threads=threads)
    estimate = moment_from_sample(model, sample, statistic, p, seed, level)
    logger.info(
        "moment_estimated",
        statistic=estimate.statistic,
        p=p,
        replicas=replicas,
        mean=estimate.mean,
        stderr=estimate.stderr,
    )
    return estimate


def tail_fit_from_values(
    values: np.ndarray,
    thresholds: Sequence[float],
    mode: str,
    statistic: str,
    min_hits: Optional[int] = None,
) -> TailFit:
    """Fit log P against log t on a strictly increasing positive grid.

    Bins with zero hits are dropped; bins with fewer than ``min_hits``
    hits are kept but recorded as warnings.
    """
    grid = np.asarray(thresholds, dtype=float)
    if grid.size < MIN_TAIL_POINTS:
        raise EstimationError(
            f"a tail fit needs at least {MIN_TAIL_POINTS} grid points", points=int(grid.size)
        )
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise EstimationError("threshold grid must be positive and strictly increasing")
    if mode not in ("exceedance", "small_ball"):
        raise EstimationError("unknown tail mode", mode=mode)
    min_hits = get_config().min_tail_hits if min_hits is None else min_hits

    n = values.shape[0]
    if mode == "exceedance":
        hits = (values[:, None] > grid[None, :]).sum(axis=0)
    else:
        hits = (values[:, None] < grid[None, :]).sum(axis=0)
    probs = hits / n

    warnings: List[str] = []
    nonzero = hits > 0
    if not np.all(nonzero):
        dropped = [float(t) for t in grid[~nonzero]]
        warnings.append(f"zero-hit bins dropped from fit: {dropped}")
    thin = nonzero & (hits < min_hits)
    if np.any(thin):
        warnings.append(
            f"bins below {min_hits} hits (widen error bars): {[float(t) for t in grid[thin]]}"
        )

    fit = TailFit(
        statistic=statistic,
        mode=mode,
        thresholds=[float(t) for t in grid],
        probabilities=[float(v) for v in probs],
        hits=[int(h) for h in hits],
        replicas=int(n),
        used_points=int(nonzero.sum()),
        warnings=warnings,
    )
    if nonzero.sum() < 2:
        fit.degenerate = True
        fit.warnings.append("fewer than two nonzero bins; no slope fitted")
        return fit

    x, y = np.log(grid[nonzero]), np.log(probs[nonzero])
    if np.ptp(y) == 0.0:
        fit.degenerate = True
        fit.warnings.append("probabilities constant over the grid; no slope fitted")
        return fit
    reg = stats.linregress(x, y)
    fit.slope = float(reg.slope)
    fit.slope_stderr = float(reg.stderr)
    fit.intercept = float(reg.intercept)
    fit.r_squared = float(reg.rvalue ** 2)
    return fit


def tail_exponent(
    model: ModelSpec,
    statistic,
    thresholds: Sequence[float],
    replicas: int,
    seed: int,
    mode: Optional[str] = None,
    threads: Optional[int] = None,
    neighborhood: Optional[int] = None,
) -> TailFit:
    """Tail exponent of a statistic at the origin.

    ``mode`` defaults to ``small_ball`` (P(X < ε)) for ``delta_at_origin``
    and to ``exceedance`` (P(X > t)) otherwise.
    """
    statistic = Statistic.parse(statistic)
    if mode is None:
        mode = "small_ball" if statistic.kind == "delta_at_origin" else "exceedance"
    if replicas < MIN_REPLICAS:
        raise EstimationError(
            f"at least {MIN_REPLICAS} replicas are required", replicas=replicas
        )
    _check_statistic(model, statistic)

    sample = sample_origin(model, replicas, seed, neighborhood=neighborhood, threads=threads)
    values = sample.values(statistic)
    if statistic.per_nucleus:
        values = values[np.isfinite(values)]
    fit = tail_fit_from_values(values, thresholds, mode, statistic.label)
    fit.seeds = _manifest(model, seed, sample)
    for message in fit.warnings:
        logger.warning("tail_fit_warning", statistic=statistic.label, detail=message)
    logger.info(
        "tail_exponent_fitted",
        statistic=statistic.label,
        mode=mode,
        slope=fit.slope,
        stderr=fit.slope_stderr,
        degenerate=fit.degenerate,
    )
    return fit


def moment_stability(
    model: ModelSpec,
    statistic,
    p: float,
    replica_grid: Sequence[int],
    seed: int,
    level: Optional[float] = None,
    threads: Optional[int] = None,
    neighborhood: Optional[int] = None,
) -> StabilityReport:
    """Running estimates of E(statistic^p) over nested prefixes of one stream.

    For a finite second moment the CI width scales like 1/sqrt(n); the
    report calls the moment stable when the width shrinks by at least
    ``STABLE_FRACTION`` of that factor between the first and last size.
    """
    statistic = Statistic.parse(statistic)
    grid = sorted(int(n) for n in replica_grid)
    if len(grid) < 2 or grid[0] < MIN_REPLICAS or len(set(grid)) != len(grid):
        raise EstimationError(
            "replica grid needs at least two distinct sizes of at least "
            f"{MIN_REPLICAS}", grid=grid
        )
    _check_statistic(model, statistic)
    level = get_config().confidence_level if level is None else level

    sample = sample_origin(model, grid[-1], seed, neighborhood=neighborhood, threads=threads)
    values = sample.values(statistic)
    values = np.nan_to_num(values, nan=0.0, posinf=0.0) ** p
    means, widths = [], []
    for n in grid:
        mean, _, lo, hi = summarize(values[:n], level)
        means.append(mean)
        widths.append(hi - lo)

    shrink = widths[0] / widths[-1] if widths[-1] > 0 else float("inf")
    expected = float(np.sqrt(grid[-1] / grid[0]))
    report = StabilityReport(
        statistic=statistic.label,
        exponent=float(p),
        replica_grid=grid,
        means=means,
        ci_widths=widths,
        shrink=float(shrink),
        expected_shrink=expected,
        stable=bool(shrink >= STABLE_FRACTION * expected),
    )
    logger.info(
        "moment_stability",
        statistic=report.statistic,
        p=p,
        shrink=report.shrink,
        expected=expected,
        stable=report.stable,
    )
    return report
