"""Output schemas and file handling of experiment runs.

Every table has a unit-bearing header row. Reports become tables here so
the runner only decides what to compute.

Key functions:
    read_spec_file: Load a spec (or the spec echoed by a manifest).
    write_tables, write_manifest: Persist a run.
    error_report: YAML text of a failure, written to stderr by the CLI.
"""

import hashlib
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

import numpy as np
import structlog
import yaml

from ..exceptions import OutputError, SpecValidationError, ThermolimitError
from ..tables import Column, Table
from .models import RunManifest

logger = structlog.get_logger("thermolimit.harness")

MANIFEST_NAME = "manifest.yaml"


# ---------------------------------------------------------------------------
# Spec and manifest files
# ---------------------------------------------------------------------------

def read_spec_file(path: Path) -> Dict[str, Any]:
    """Mapping of a YAML spec file; a manifest yields the spec it echoes.

    Raises:
        OutputError: the file cannot be read.
        SpecValidationError: the file is not YAML or not a mapping.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot read spec file: {exc.strerror or exc}", path=str(path))
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecValidationError("spec file is not valid YAML",
                                  violations=[f"<spec>: {exc}"], path=str(path))
    if not isinstance(data, dict):
        raise SpecValidationError("spec file must hold a mapping",
                                  violations=["<spec>: expected a mapping"], path=str(path))
    if "spec" in data and "outputs" in data:
        data = data["spec"]
    return data


def write_tables(tables: Iterable[Table], out_dir: Path) -> Dict[str, str]:
    """Write ``<name>.csv`` per table; return file name -> sha256."""
    checksums: Dict[str, str] = {}
    out_dir = Path(out_dir)
    for table in tables:
        name = f"{table.name}.csv"
        try:
            checksums[name] = table.write_csv(out_dir / name)
        except OSError as exc:
            raise OutputError(f"cannot write output: {exc.strerror or exc}",
                              path=str(out_dir / name))
        logger.debug("table_written", file=name, rows=len(table.rows))
    return checksums


def write_manifest(manifest: RunManifest, out_dir: Path) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            yaml.safe_dump(manifest.model_dump(mode="json"), sort_keys=False),
            encoding="utf-8",
        )
    except OSError as exc:
        raise OutputError(f"cannot write manifest: {exc.strerror or exc}", path=str(path))
    return path


def read_manifest(path: Path) -> RunManifest:
    try:
        return RunManifest.model_validate(yaml.safe_load(Path(path).read_text(encoding="utf-8")))
    except OSError as exc:
        raise OutputError(f"cannot read manifest: {exc.strerror or exc}", path=str(path))


def error_report(exc: BaseException) -> str:
    """YAML error report; unexpected exceptions are reported as numerical failures."""
    if isinstance(exc, ThermolimitError):
        report = exc.to_report()
    else:
        report = {
            "error": exc.__class__.__name__,
            "category": "numerical",
            "module": None,
            "message": str(exc),
            "context": {},
        }
    return yaml.safe_dump({"status": "error", **report}, sort_keys=False)


# ---------------------------------------------------------------------------
# Table schemas
# ---------------------------------------------------------------------------

def moments_table(estimates: Sequence) -> Table:
    table = Table("moments", [
        Column("statistic"), Column("p"), Column("replicas"), Column("mean"),
        Column("stderr"), Column("level"), Column("ci_lo"), Column("ci_hi"),
    ])
    for e in estimates:
        table.add(e.statistic, e.exponent, e.replicas, e.mean, e.stderr, e.level, e.lo, e.hi)
    return table


def stability_table(reports: Sequence) -> Table:
    table = Table("stability", [
        Column("statistic"), Column("p"), Column("replicas"), Column("mean"),
        Column("ci_width"), Column("shrink"), Column("expected_shrink"), Column("stable"),
    ])
    for r in reports:
        for n, mean, width in zip(r.replica_grid, r.means, r.ci_widths):
            table.add(r.statistic, r.exponent, n, mean, width, r.shrink, r.expected_shrink,
                      r.stable)
    return table


def bounds_table(reports: Sequence) -> Table:
    table = Table("bounds", [
        Column("inequality"), Column("p"), Column("lhs"), Column("lhs_stderr"),
        Column("rhs"), Column("rhs_stderr"), Column("holds"), Column("rhs_is_lower_bound"),
    ])
    for r in reports:
        table.add(r.name, r.p, r.lhs, r.lhs_stderr, r.rhs, r.rhs_stderr, r.holds,
                  r.rhs_is_lower_bound)
    return table


def tail_table(fits: Sequence) -> Table:
    table = Table("tails", [
        Column("statistic"), Column("mode"), Column("threshold"), Column("probability"),
        Column("hits", "count"), Column("replicas"),
    ])
    for fit in fits:
        for t, prob, hits in zip(fit.thresholds, fit.probabilities, fit.hits):
            table.add(fit.statistic, fit.mode, t, prob, hits, fit.replicas)
    return table


def tail_fit_table(fits: Sequence) -> Table:
    table = Table("tail_fits", [
        Column("statistic"), Column("mode"), Column("slope"), Column("slope_stderr"),
        Column("intercept"), Column("r_squared"), Column("used_points"), Column("degenerate"),
    ])
    for fit in fits:
        table.add(fit.statistic, fit.mode, fit.slope, fit.slope_stderr, fit.intercept,
                  fit.r_squared, fit.used_points, fit.degenerate)
    return table


def collar_table(estimate) -> Table:
    profile = estimate.profile
    table = Table("collar", [
        Column("t"), Column("collar_volume", "length^3"), Column("stderr", "length^3"),
        Column("ratio"),
    ])
    for t, v, se, ratio in zip(profile.t, profile.volumes, profile.stderrs, estimate.ratios):
        table.add(t, v, se, ratio)
    return table


def cone_table(report) -> Table:
    table = Table("cone_witnesses", [
        Column("x", "length"), Column("y", "length"), Column("z", "length"),
        Column("inside"), Column("signed_distance", "length"),
    ])
    for w in report.witnesses:
        table.add(w.point[0], w.point[1], w.point[2], w.inside, w.signed_distance)
    return table


def tiling_table(rows: Sequence) -> Table:
    table = Table("tiling_identity", [
        Column("scale"), Column("domain_volume", "length^3"),
        Column("group_average", "length^3"), Column("stderr", "length^3"),
        Column("rel_error"), Column("group_samples"),
    ])
    for r in rows:
        table.add(r.scale, r.lhs, r.rhs, r.rhs_stderr, r.rel_error, r.group_samples)
    return table


def classification_table(results: Sequence, sizes: Sequence[float], scale: float) -> Table:
    table = Table("cell_classification", [
        Column("size", "length"), Column("scale"), Column("domain_volume", "length^3"),
        Column("inner", "count"), Column("boundary", "count"), Column("inner_fraction"),
        Column("radius", "length"), Column("audit_violations", "count"),
    ])
    for size, c in zip(sizes, results):
        table.add(size, scale, c.domain_volume, c.inner, c.boundary, c.inner_fraction,
                  c.radius, c.audit_violations)
    return table


def energy_table(report) -> Table:
    table = Table("energy_cells", [
        Column("i"), Column("j"), Column("k"), Column("kinetic", "energy"),
        Column("boundary", "energy"), Column("attraction", "energy"),
    ])
    b = report.breakdown
    if b is not None:
        for r in range(len(b)):
            i, j, k = b.cells[r]
            table.add(i, j, k, b.kinetic[r], b.boundary[r], b.attraction[r])
    return table


def summary_table(name: str, values: Dict[str, Any]) -> Table:
    """Two-column table of headline quantities."""
    table = Table(name, [Column("quantity"), Column("value")])
    for key, value in values.items():
        table.add(key, value)
    return table


def ergodic_table(series_list: Sequence) -> Table:
    table = Table("ergodic", [
        Column("statistic"), Column("size", "length"), Column("volume", "length^3"),
        Column("replicas"), Column("mean"), Column("stderr"), Column("l1_error"),
        Column("l1_stderr"), Column("trace"), Column("reference"),
    ])
    for s in series_list:
        for p in s.points:
            table.add(s.statistic, p.size, p.volume, p.replicas, p.mean, p.stderr,
                      p.l1_deviation, p.l1_stderr, p.trace, s.reference)
    return table


def neutrality_table(report) -> Table:
    table = Table("neutrality", [
        Column("size", "length"), Column("volume", "length^3"), Column("replicas"),
        Column("charge_density", "e/length^3"), Column("stderr", "e/length^3"),
        Column("ci_lo", "e/length^3"), Column("ci_hi", "e/length^3"),
        Column("reference", "e/length^3"),
    ])
    for p in report.points:
        table.add(p.size, p.volume, p.replicas, p.estimate, p.stderr, p.lo, p.hi,
                  report.reference)
    return table


def scaling_table(series, z: float) -> Table:
    """(L, |D|, mean, L¹ deviation, CI) per size of a thermodynamic scan."""
    table = Table("scaling", [
        Column("L", "length"), Column("volume", "length^3"),
        Column("mean", "energy/length^3"), Column("stderr", "energy/length^3"),
        Column("ci_lo", "energy/length^3"), Column("ci_hi", "energy/length^3"),
        Column("l1_deviation", "energy/length^3"), Column("l1_stderr", "energy/length^3"),
        Column("kinetic", "energy/length^3"), Column("boundary", "energy/length^3"),
        Column("trace", "energy/length^3"),
    ])
    for p in series.points:
        table.add(p.size, p.volume, p.mean, p.stderr, p.mean - z * p.stderr,
                  p.mean + z * p.stderr, p.l1_deviation, p.l1_stderr, p.kinetic,
                  p.boundary, p.trace)
    return table


def gap_table(reports: Sequence) -> Table:
    table = Table("gap", [
        Column("scale"), Column("lhs", "energy"), Column("rhs", "energy"),
        Column("gap", "energy"), Column("tiled_mean", "energy"),
        Column("tiled_stderr", "energy"), Column("nuclei_in_domain", "count"),
        Column("c_gs"),
    ])
    for r in reports:
        table.add(r.scale, r.lhs, r.rhs, r.gap, r.tiled_mean, r.tiled_stderr,
                  r.nuclei_in_domain, r.c_gs)
    return table


def seed_digest(seeds: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(seeds, dtype="<u8").tobytes()).hexdigest()


def plain(values: Dict[str, Any]) -> Dict[str, Any]:
    """Manifest-safe copy of a summary: numpy scalars become Python scalars."""
    out: Dict[str, Any] = {}
    for key, value in values.items():
        if isinstance(value, np.generic):
            value = value.item()
        elif isinstance(value, (list, tuple)):
            value = [v.item() if isinstance(v, np.generic) else v for v in value]
        out[key] = value
    return out
