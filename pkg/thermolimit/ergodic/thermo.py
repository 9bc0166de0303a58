"""Thermodynamic scaling of the classical proxy energy.

The proxy F(ω, D) is the trial-state energy without the attraction term:
kinetic surrogate plus boundary dipole sum. It is stationary,
F(τ_k ω, D) = F(ω, D - k), so its per-volume value has a deterministic
limit along regular domain sequences.
"""

from typing import List, Optional, Sequence

import numpy as np
import structlog

from ..config import get_config
from ..electrostatics.screening import trial_energy
from ..exceptions import ErgodicError
from ..geometry.regularity import fisher_a_estimate
from ..moments.estimators import MIN_REPLICAS, summarize
from ..nuclei.models import ConstantCharge, ModelSpec, PointMass
from ..parallel import run_ordered
from ..resource_guard import resolve_threads
from .averages import replica_configurations
from .models import DomainSequence, ScalingPoint, ScalingSeries, log_slope, richardson_limit

logger = structlog.get_logger("thermolimit.ergodic")

FISHER_GRID = (0.005, 0.01, 0.02)
FISHER_POINTS = 20_000

# L¹ deviation slopes against log |D|
STABLE_SLOPE = -1.0 / 3.0
CLT_SLOPE = -0.5


def expected_fluctuation_slope(model: ModelSpec) -> Optional[float]:
    """Predicted slope of log L¹ deviation of F/|D| against log |D|.

    When two nuclei can meet, P(δ < ε) ~ ε³ makes P(1/δ′² > t) ~ t^{-3/2}:
    the kinetic sum has infinite variance, lies in the domain of a
    3/2-stable law and fluctuates like |D|^{2/3}, so F/|D| deviates like
    |D|^{-1/3}. When δ is bounded below the CLT gives |D|^{-1/2}. None for
    a model without randomness.
    """
    if model.kind == "poisson":
        return STABLE_SLOPE
    reach = 2.0 * model.displacement.support_radius(model.lattice)
    if reach >= model.lattice.shortest_vector:
        return STABLE_SLOPE
    if isinstance(model.displacement, PointMass) and isinstance(model.charge, ConstantCharge):
        return None
    return CLT_SLOPE


def proxy_energy_terms(config, shapes: Sequence, cone_epsilon: float,
                       c_kin: float, seed: int) -> np.ndarray:
    """(sizes, 2) array of (kinetic, boundary) of one realization."""
    out = np.empty((len(shapes), 2))
    for n, shape in enumerate(shapes):
        report = trial_energy(config, shape, cone_epsilon, c_kin, seed, breakdown=False)
        out[n] = (report.kinetic, report.boundary)
    return out


def thermo_scan(
    model: ModelSpec,
    sequence: DomainSequence,
    cone_epsilon: float,
    c_kin: float = 1.0,
    replicas: int = MIN_REPLICAS,
    seed: int = 0,
    threads: Optional[int] = None,
    fisher_audit: bool = False,
) -> ScalingSeries:
    """Mean and L¹ deviation of F(ω, D_n)/|D_n| over replicas, with fitted limits.

    Args:
        model: Nuclear model.
        sequence: Nested domains (Fisher-audited when ``fisher_audit``).
        cone_epsilon: Collar width ε of the screening construction.
        c_kin: Kinetic surrogate constant.
        replicas: Independent realizations (≥ 30).
        seed: Master seed.
        threads: Worker threads.
        fisher_audit: Also estimate the Fisher constant a of every domain.
    """
    if replicas < MIN_REPLICAS:
        raise ErgodicError(f"thermo_scan needs at least {MIN_REPLICAS} replicas",
                           replicas=replicas)
    shapes = sequence.shapes()
    volumes = np.array([float(s.volume) for s in shapes])
    seeds, sample = replica_configurations(model, sequence, seed, replicas, stream="thermo")

    fisher: List[float] = []
    if fisher_audit:
        fisher = [fisher_a_estimate(s, FISHER_GRID, FISHER_POINTS, seed).a for s in shapes]

    def _replica(s) -> np.ndarray:
        return proxy_energy_terms(sample(s), shapes, cone_epsilon, c_kin, seed)

    terms = np.array(run_ordered(_replica, list(seeds), resolve_threads(threads)))
    per_volume = terms / volumes[None, :, None]
    totals = per_volume.sum(axis=2)

    level = get_config().confidence_level
    points: List[ScalingPoint] = []
    for n, (size, volume) in enumerate(zip(sequence.sizes, volumes)):
        mean, stderr, _, _ = summarize(totals[:, n], level)
        dev = np.abs(totals[:, n] - mean)
        points.append(ScalingPoint(
            size=size,
            volume=float(volume),
            replicas=replicas,
            mean=mean,
            stderr=stderr,
            l1_deviation=float(dev.mean()),
            l1_stderr=float(dev.std(ddof=1) / np.sqrt(replicas)),
            trace=float(totals[0, n]),
            kinetic=float(per_volume[:, n, 0].mean()),
            boundary=float(per_volume[:, n, 1].mean()),
        ))

    vols = [p.volume for p in points]
    slope, slope_se = log_slope(vols, [p.l1_deviation for p in points])
    boundary_slope, _ = log_slope(vols, [p.boundary for p in points])
    series = ScalingSeries(
        points=points,
        fitted_limit=richardson_limit(vols, [p.mean for p in points]),
        kinetic_limit=richardson_limit(vols, [p.kinetic for p in points]),
        boundary_limit=richardson_limit(vols, [p.boundary for p in points]),
        fluctuation_slope=slope,
        fluctuation_slope_stderr=slope_se,
        expected_fluctuation_slope=expected_fluctuation_slope(model),
        boundary_slope=boundary_slope,
        cone_epsilon=float(cone_epsilon),
        c_kin=float(c_kin),
        seed=int(seed),
        fisher=fisher,
    )
    logger.info(
        "thermo_scan",
        sizes=sequence.sizes,
        limit=series.fitted_limit,
        fluctuation_slope=slope,
        expected_slope=series.expected_fluctuation_slope,
        boundary_slope=boundary_slope,
    )
    return series
