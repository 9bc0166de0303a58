"""Ergodic averages of cell statistics and the neutrality estimate.

Every replica samples one realization on the window of the largest
domain; all domains of the (nested) sequence are evaluated on it, so
replica 0 gives a single-realization trace through the sizes.
"""

from typing import List, Optional, Tuple

import numpy as np
import structlog

from .. import rng
from ..config import get_config
from ..exceptions import ErgodicError
from ..geometry.shapes import shape_signed_distance
from ..moments.estimators import summarize
from ..moments.models import Statistic
from ..nuclei.models import ModelSpec, NuclearConfiguration
from ..nuclei.sampler import realize
from ..parallel import run_ordered
from ..resource_guard import resolve_threads
from ..spatial.index import build_index
from ..spatial.statistics import all_cell_statistics
from .models import DomainSequence, ErgodicSeries, NeutralityPoint, NeutralityReport, ScalingPoint

logger = structlog.get_logger("thermolimit.ergodic")

ERGODIC_STREAM = "ergodic"
CELL_STATISTICS = ("X0", "X1", "Xp", "charge")


def replica_configurations(model: ModelSpec, sequence: DomainSequence, seed: int,
                           replicas: int, stream: str = ERGODIC_STREAM):
    """Seeds of the replicas and a sampler for each of them."""
    seeds = rng.replica_seeds(seed, stream, replicas)
    window = sequence.window()

    def _sample(s) -> NuclearConfiguration:
        return realize(model, window, int(s))

    return seeds, _sample


def sites_in_domain(shape, sites: np.ndarray, lattice) -> np.ndarray:
    """Mask of lattice sites lying in D."""
    return shape_signed_distance(shape, sites, np.zeros((sites.shape[0], 3)), lattice) < 0


def analytic_mean(model: ModelSpec, statistic: Statistic) -> Optional[float]:
    """E X for the statistics with a closed form (per cell)."""
    if statistic.kind == "X0":
        return model.nuclei_per_cell
    if statistic.kind == "charge":
        return model.charge_per_volume * model.lattice.cell_volume
    return None


def _cell_values(config: NuclearConfiguration, statistic: Statistic,
                 cells: np.ndarray) -> np.ndarray:
    if len(config) < 2:
        values = np.zeros(cells.shape[0])
        if statistic.kind in ("X0", "charge") and len(config) == 1:
            owner = np.all(cells == config.cells()[0], axis=1)
            values[owner] = 1.0 if statistic.kind == "X0" else config.charges[0]
        return values
    table = all_cell_statistics(build_index(config), eps=statistic.truncation,
                                p_list=[statistic.p], cells=cells)
    if statistic.kind == "X0":
        return table.x0.astype(float)
    if statistic.kind == "X1":
        return table.x1
    if statistic.kind == "charge":
        return table.charge
    return table.xp[(statistic.p, statistic.truncation)]


def ergodic_average(
    model: ModelSpec,
    statistic,
    seed: int,
    sequence: DomainSequence,
    replicas: int = 100,
    threads: Optional[int] = None,
) -> ErgodicSeries:
    """(1/|D_n|) Σ_{k ∈ L∩D_n} X(τ_k ω) for each domain of the sequence.

    Args:
        model: Nuclear model.
        statistic: One of X0, X1, Xp(p, ε), charge.
        seed: Master seed; replica 0 is the single-realization trace.
        sequence: Nested domains.
        replicas: Number of independent realizations (≥ 2).
        threads: Worker threads.

    The L¹ error of each size is measured against E X when it has a closed
    form (X0, charge) and against the cross-replica mean of the largest size
    otherwise.
    """
    statistic = Statistic.parse(statistic)
    if statistic.kind not in CELL_STATISTICS:
        raise ErgodicError("ergodic averages need a per-cell statistic",
                           statistic=statistic.label)
    if replicas < 2:
        raise ErgodicError("ergodic averages need at least 2 replicas", replicas=replicas)

    shapes = sequence.shapes()
    volumes = [float(s.volume) for s in shapes]
    lattice = model.lattice
    all_sites = lattice.sites_near_box(sequence.window(), 0.0)
    masks = [sites_in_domain(s, all_sites, lattice) for s in shapes]
    union = np.any(masks, axis=0)
    cells = all_sites[union]
    masks = [m[union] for m in masks]
    seeds, sample = replica_configurations(model, sequence, seed, replicas)

    def _replica(s) -> np.ndarray:
        values = _cell_values(sample(s), statistic, cells)
        return np.array([values[m].sum() / v for m, v in zip(masks, volumes)])

    averages = np.array(run_ordered(_replica, list(seeds), resolve_threads(threads)))

    reference = analytic_mean(model, statistic)
    kind = "analytic"
    if reference is None:
        reference = float(averages[:, -1].mean())
        kind = "largest-size mean"
    level = get_config().confidence_level
    points: List[ScalingPoint] = []
    for n, (size, volume) in enumerate(zip(sequence.sizes, volumes)):
        mean, stderr, _, _ = summarize(averages[:, n], level)
        dev = np.abs(averages[:, n] - reference)
        l1, l1_se, _, _ = summarize(dev, level)
        points.append(ScalingPoint(
            size=size, volume=volume, replicas=replicas, mean=mean, stderr=stderr,
            l1_deviation=l1, l1_stderr=l1_se, trace=float(averages[0, n]),
        ))
    series = ErgodicSeries(
        statistic=statistic.label,
        family=sequence.family,
        reference=float(reference),
        reference_kind=kind,
        points=points,
        seed=int(seed),
    )
    logger.info("ergodic_average", statistic=statistic.label, sizes=sequence.sizes,
                l1=series.l1_errors, reference=reference)
    return series


def domain_charge(config: NuclearConfiguration, shape) -> Tuple[float, int]:
    """(Σ_{K∩D} z, #(K∩D))."""
    if len(config) == 0:
        return 0.0, 0
    sd = shape_signed_distance(shape, config.sites, config.displacements, config.lattice)
    inside = sd < 0
    return float(config.charges[inside].sum()), int(inside.sum())


def neutrality_estimate(
    model: ModelSpec,
    sequence: DomainSequence,
    replicas: int,
    seed: int,
    level: Optional[float] = None,
    threads: Optional[int] = None,
) -> NeutralityReport:
    """(1/|D|) Σ_{(R,z) ∈ K∩D} z per size, with a CLT interval; tends to Z_av/|W|."""
    if replicas < 2:
        raise ErgodicError("the neutrality estimate needs at least 2 replicas", replicas=replicas)
    level = get_config().confidence_level if level is None else level
    shapes = sequence.shapes()
    volumes = [float(s.volume) for s in shapes]
    seeds, sample = replica_configurations(model, sequence, seed, replicas, stream="neutrality")

    def _replica(s) -> np.ndarray:
        config = sample(s)
        return np.array([domain_charge(config, d)[0] / v for d, v in zip(shapes, volumes)])

    values = np.array(run_ordered(_replica, list(seeds), resolve_threads(threads)))
    points = []
    for n, (size, volume) in enumerate(zip(sequence.sizes, volumes)):
        mean, stderr, lo, hi = summarize(values[:, n], level)
        points.append(NeutralityPoint(
            size=size, volume=volume, replicas=replicas, estimate=mean, stderr=stderr,
            lo=min(lo, mean), hi=max(hi, mean),
            per_replica=[float(v) for v in values[:, n]],
        ))
    report = NeutralityReport(
        reference=model.charge_per_volume,
        cell_volume=model.lattice.cell_volume,
        level=level,
        points=points,
        seed=int(seed),
    )
    logger.info("neutrality_estimate", estimate=points[-1].estimate,
                reference=report.reference, sizes=sequence.sizes)
    return report
