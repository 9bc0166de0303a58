"""Experiment dispatcher.

``run`` validates a spec, calls the module operation of its kind, writes
the CSV tables and a manifest, and returns the manifest. The dispatcher
itself is single-threaded; ``threads`` only reaches the module internals,
whose results do not depend on it.

Key functions:
    run: Execute one ExperimentSpec.
    run_from_file: Read, validate and execute a spec file.
"""

import dataclasses
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import structlog

from .. import __version__, rng
from ..config import get_config
from ..diagnostics import environment_summary
from ..electrostatics.screening import trial_energy
from ..ergodic.averages import ERGODIC_STREAM, ergodic_average, neutrality_estimate
from ..ergodic.gap import graf_schenker_gap
from ..ergodic.thermo import thermo_scan
from ..exceptions import SpecValidationError, UnsupportedShapeError
from ..geometry.models import TilingSpec
from ..geometry.regularity import cone_check, fisher_a_estimate, regularized_volume
from ..geometry.tiling import boundary_scaling, haar_angle_ks, tiling_volume_identity
from ..moments.bounds import check_X0_norm_bound, check_X1_implies_X0
from ..moments.estimators import estimate_moment, moment_stability, tail_exponent, z_value
from ..moments.origin import ORIGIN_STREAM
from ..nuclei.export import nuclei_table
from ..nuclei.models import NuclearConfiguration
from ..nuclei.sampler import realize
from ..resource_guard import resolve_threads
from ..spatial.index import build_index
from ..spatial.statistics import all_cell_statistics, cell_table
from ..tables import Table
from . import outputs
from .models import (
    ExperimentSpec,
    ReplicaSeeds,
    RunManifest,
    check_preconditions,
    validate_spec,
)

logger = structlog.get_logger("thermolimit.harness")

# Leading replica seeds echoed in the manifest
MANIFEST_SEEDS = 8

# (tables, summary, replica streams as (label, count))
Outcome = Tuple[List[Table], Dict[str, Any], List[Tuple[str, int]]]


def _window_only(config: NuclearConfiguration) -> NuclearConfiguration:
    keep = config.inside()
    return dataclasses.replace(
        config,
        sites=config.sites[keep],
        displacements=config.displacements[keep],
        charges=config.charges[keep],
    )


def _domain_configuration(spec: ExperimentSpec) -> NuclearConfiguration:
    return realize(spec.model, spec.domain.bbox(), spec.seed)


# ---------------------------------------------------------------------------
# One handler per experiment kind
# ---------------------------------------------------------------------------

def _sample(spec: ExperimentSpec, threads: int) -> Outcome:
    config = _window_only(realize(spec.model, spec.window, spec.seed))
    summary = {"nuclei": len(config), "total_charge": float(config.charges.sum())}
    return [nuclei_table(config)], summary, []


def _stats(spec: ExperimentSpec, threads: int) -> Outcome:
    eps = spec.eps if spec.eps is not None else get_config().truncation_epsilon
    config = realize(spec.model, spec.window, spec.seed)
    table = all_cell_statistics(build_index(config), eps=eps, p_list=[1.0, 2.0])
    summary = {
        "cells": len(table),
        "mean_X0": float(table.x0.mean()) if len(table) else 0.0,
        "mean_X1": float(table.x1.mean()) if len(table) else 0.0,
        "truncated_cells": int(np.sum(table.truncated)),
    }
    return [cell_table(table, eps)], summary, []


def _moments(spec: ExperimentSpec, threads: int) -> Outcome:
    estimates = [
        estimate_moment(spec.model, s, p, spec.replicas, spec.seed, threads=threads)
        for s in spec.parsed_statistics() for p in spec.exponents
    ]
    tables = [outputs.moments_table(estimates)]
    count = spec.replicas
    if spec.replica_grid:
        reports = [
            moment_stability(spec.model, s, p, spec.replica_grid, spec.seed, threads=threads)
            for s in spec.parsed_statistics() for p in spec.exponents
        ]
        tables.append(outputs.stability_table(reports))
        count = max(count, max(spec.replica_grid))
    if spec.bounds:
        checks = [check_X0_norm_bound(spec.model, p, spec.replicas, spec.seed, threads=threads)
                  for p in spec.exponents]
        checks += [check_X1_implies_X0(spec.model, p, spec.replicas, spec.seed, threads=threads)
                   for p in spec.exponents]
        tables.append(outputs.bounds_table(checks))
    summary = {f"{e.statistic}^{e.exponent:g}": e.mean for e in estimates}
    return tables, summary, [(ORIGIN_STREAM, count)]


def _tails(spec: ExperimentSpec, threads: int) -> Outcome:
    fits = [
        tail_exponent(spec.model, s, spec.thresholds, spec.replicas, spec.seed,
                      mode=spec.tail_mode, threads=threads)
        for s in spec.parsed_statistics()
    ]
    summary = {f"{f.statistic}_slope": f.slope for f in fits}
    return ([outputs.tail_table(fits), outputs.tail_fit_table(fits)], summary,
            [(ORIGIN_STREAM, spec.replicas)])


def _geometry(spec: ExperimentSpec, threads: int) -> Outcome:
    shape = spec.domain
    fisher = fisher_a_estimate(shape, spec.t_grid, spec.n_mc, spec.seed, threads)
    cone = cone_check(shape, spec.cone_epsilon, spec.cone_samples, spec.seed)
    try:
        regular = regularized_volume(shape, spec.model.lattice)
    except UnsupportedShapeError:
        regular = None
    summary = {
        "volume": float(shape.volume),
        "fisher_a": fisher.a,
        "fisher_a_stderr": fisher.stderr,
        "cone_passed": cone.passed,
        "cone_witnesses": len(cone.witnesses),
        "regularized_volume": regular,
    }
    tables = [outputs.collar_table(fisher), outputs.cone_table(cone),
              outputs.summary_table("geometry", summary)]
    return tables, summary, []


def _tiling(spec: ExperimentSpec, threads: int) -> Outcome:
    lattice = spec.model.lattice
    identities = [
        tiling_volume_identity(spec.domain, TilingSpec(scale=scale), spec.n_g,
                               spec.points_per_group, spec.seed, lattice, threads)
        for scale in spec.scales
    ]
    haar = haar_angle_ks(spec.n_g, spec.seed)
    summary: Dict[str, Any] = {
        "max_rel_error": max(r.rel_error for r in identities),
        "haar_pvalue": haar.pvalue,
    }
    tables = [outputs.tiling_table(identities)]
    if spec.sequence is not None and len(spec.sequence.sizes) >= 2:
        tiling = TilingSpec(scale=spec.scales[0])
        results, boundary_slope, inner_slope = boundary_scaling(
            spec.sequence.shapes(), tiling, spec.seed, lattice)
        tables.append(outputs.classification_table(results, spec.sequence.sizes, tiling.scale))
        summary.update(boundary_slope=boundary_slope, inner_slope=inner_slope,
                       inner_fraction=results[-1].inner_fraction)
    tables.append(outputs.summary_table("tiling", summary))
    return tables, summary, []


def _energy(spec: ExperimentSpec, threads: int) -> Outcome:
    report = trial_energy(_domain_configuration(spec), spec.domain, spec.cone_epsilon,
                          spec.c_kin, spec.seed)
    summary = report.summary()
    return ([outputs.energy_table(report), outputs.summary_table("energy", summary)],
            summary, [])


def _ergodic(spec: ExperimentSpec, threads: int) -> Outcome:
    series = [
        ergodic_average(spec.model, s, spec.seed, spec.sequence, spec.replicas, threads)
        for s in spec.parsed_statistics()
    ]
    tables = [outputs.ergodic_table(series)]
    streams = [(ERGODIC_STREAM, spec.replicas)]
    summary: Dict[str, Any] = {f"{s.statistic}_l1": s.l1_errors[-1] for s in series}
    if spec.neutrality:
        report = neutrality_estimate(spec.model, spec.sequence, spec.replicas, spec.seed,
                                     threads=threads)
        tables.append(outputs.neutrality_table(report))
        streams.append(("neutrality", spec.replicas))
        summary["z_av"] = report.z_av
    return tables, summary, streams


def _thermo(spec: ExperimentSpec, threads: int) -> Outcome:
    series = thermo_scan(spec.model, spec.sequence, spec.cone_epsilon, spec.c_kin,
                         spec.replicas, spec.seed, threads)
    summary = {
        "fitted_limit": series.fitted_limit,
        "kinetic_limit": series.kinetic_limit,
        "boundary_limit": series.boundary_limit,
        "fluctuation_slope": series.fluctuation_slope,
        "fluctuation_slope_stderr": series.fluctuation_slope_stderr,
        "expected_fluctuation_slope": series.expected_fluctuation_slope,
        "boundary_slope": series.boundary_slope,
    }
    z = z_value(get_config().confidence_level)
    return ([outputs.scaling_table(series, z), outputs.summary_table("thermo", summary)],
            summary, [("thermo", spec.replicas)])


def _gap(spec: ExperimentSpec, threads: int) -> Outcome:
    config = _domain_configuration(spec)
    reports = [
        graf_schenker_gap(config, spec.domain, TilingSpec(scale=scale), spec.n_g, spec.seed,
                          spec.c_gs, spec.cone_epsilon, spec.c_kin, threads)
        for scale in spec.scales
    ]
    summary = {f"gap_l{r.scale:g}": r.gap for r in reports}
    return [outputs.gap_table(reports)], summary, []


HANDLERS: Dict[str, Callable[[ExperimentSpec, int], Outcome]] = {
    "sample": _sample,
    "stats": _stats,
    "moments": _moments,
    "tails": _tails,
    "geometry": _geometry,
    "tiling": _tiling,
    "energy": _energy,
    "ergodic": _ergodic,
    "thermo": _thermo,
    "gap": _gap,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def _replica_seeds(master: int, label: str, count: int) -> ReplicaSeeds:
    seeds = rng.replica_seeds(master, label, count)
    return ReplicaSeeds(
        stream=label,
        stream_seed=rng.derive_seed(master, label),
        count=int(count),
        first=[int(s) for s in seeds[:MANIFEST_SEEDS]],
        sha256=outputs.seed_digest(seeds),
    )


def run(
    spec: ExperimentSpec,
    out_dir: Optional[Path] = None,
    threads: Optional[int] = None,
) -> RunManifest:
    """Run one experiment and write its tables and manifest.

    Args:
        spec: A validated spec (preconditions are re-checked here).
        out_dir: Output directory; defaults to ``spec.out`` or
            ``runs/<kind>-<seed>``.
        threads: Worker threads for module internals.

    Raises:
        SpecValidationError: the spec violates a precondition.
        ThermolimitError: a module operation failed.
    """
    violations = check_preconditions(spec)
    if violations:
        raise SpecValidationError("experiment spec is invalid", violations=violations)
    out_dir = Path(out_dir or spec.out or f"runs/{spec.kind}-{spec.seed}")
    workers = resolve_threads(threads)
    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    logger.info("run_started", kind=spec.kind, seed=spec.seed, out=str(out_dir), threads=workers)

    tables, summary, streams = HANDLERS[spec.kind](spec, workers)
    checksums = outputs.write_tables(tables, out_dir)

    manifest = RunManifest(
        spec=spec.model_dump(mode="json", exclude_none=True),
        version=__version__,
        kind=spec.kind,
        master_seed=spec.seed,
        streams={spec.kind: rng.derive_seed(spec.seed, spec.kind)},
        replica_seeds=[_replica_seeds(spec.seed, label, n) for label, n in streams],
        started_at=started.isoformat(timespec="seconds"),
        wall_clock_seconds=round(time.perf_counter() - clock, 3),
        threads=workers,
        outputs=checksums,
        summary=outputs.plain(summary),
        environment=environment_summary(),
    )
    outputs.write_manifest(manifest, out_dir)
    logger.info("run_finished", kind=spec.kind, outputs=sorted(checksums),
                seconds=manifest.wall_clock_seconds)
    return manifest


def load_spec(
    path: Path,
    overrides: Optional[Dict[str, Any]] = None,
    kind: Optional[str] = None,
) -> ExperimentSpec:
    """Read and validate a spec file, applying CLI overrides first.

    ``kind`` is the experiment kind the caller expects; a spec naming
    another kind is rejected, one naming none gets it.

    Raises:
        OutputError: the file cannot be read.
        SpecValidationError: listing every violation.
    """
    data = outputs.read_spec_file(path)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    mismatch = []
    if kind is not None:
        named = data.setdefault("kind", kind)
        if named != kind:
            mismatch.append(f"kind: spec names {named!r} but the {kind} command was run")
    spec, violations = validate_spec(data)
    violations = mismatch + violations
    if violations:
        logger.warning("spec_invalid", path=str(path), violations=len(violations))
        raise SpecValidationError("experiment spec is invalid", violations=violations,
                                  path=str(path))
    return spec


def run_from_file(
    path: Path,
    out_dir: Optional[Path] = None,
    threads: Optional[int] = None,
    overrides: Optional[Dict[str, Any]] = None,
    kind: Optional[str] = None,
) -> RunManifest:
    return run(load_spec(path, overrides, kind), out_dir, threads)
