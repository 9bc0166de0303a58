"""Experiment specs, dispatch, CSV outputs and run manifests."""

from .models import (
    EXPERIMENT_KINDS,
    ExperimentSpec,
    ReplicaSeeds,
    RunManifest,
    check_preconditions,
    validate_spec,
)
from .outputs import error_report, read_manifest, read_spec_file, write_manifest, write_tables
from .runner import HANDLERS, load_spec, run, run_from_file

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentSpec",
    "HANDLERS",
    "ReplicaSeeds",
    "RunManifest",
    "check_preconditions",
    "error_report",
    "load_spec",
    "read_manifest",
    "read_spec_file",
    "run",
    "run_from_file",
    "validate_spec",
    "write_manifest",
    "write_tables",
]
