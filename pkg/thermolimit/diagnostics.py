"""Environment diagnostics for thermolimit.

Reports the interpreter, the numerical libraries and the resource
snapshot. Used by ``thermolimit diagnose`` and embedded in every run
manifest.

Key functions:
    check_package: Installed version of one dependency.
    check_host: Resource snapshot as a check result.
    run_all_checks: All checks, keyed by name.
    environment_summary: Plain mapping for run manifests.
"""

import platform
from importlib import metadata
from typing import Dict, Tuple

import structlog

from .resource_guard import check_resources

logger = structlog.get_logger("thermolimit.harness")

# Result tuple: (ok, detail, hint)
DiagResult = Tuple[bool, str, str]

PACKAGES = ("numpy", "scipy", "pydantic", "structlog", "PyYAML", "psutil")


def check_package(name: str) -> DiagResult:
    """Check that a distribution is installed and report its version."""
    try:
        return True, metadata.version(name), ""
    except metadata.PackageNotFoundError:
        return False, "not installed", f"Install it: pip install {name}"


def check_host() -> DiagResult:
    status = check_resources()
    detail = (
        f"{status.cpu_count} CPUs, {status.memory_available_mb:.0f} MB free "
        f"({status.memory_percent:.0f}% used)"
    )
    if status.ok:
        return True, detail, ""
    return False, f"{detail}: {status.reason}", "Run with --threads 1"


def run_all_checks() -> Dict[str, DiagResult]:
    """Run all checks and return aggregated results."""
    results: Dict[str, DiagResult] = {
        "python": (True, platform.python_version(), ""),
    }
    for name in PACKAGES:
        results[name] = check_package(name)
    results["host"] = check_host()
    failed = [name for name, (ok, _, _) in results.items() if not ok]
    if failed:
        logger.warning("diagnostics_failed", checks=failed)
    return results


def environment_summary() -> dict:
    """Versions for a run manifest; host load is left out so manifests stay comparable."""
    summary = {"python": platform.python_version(), "platform": platform.system()}
    for name in PACKAGES:
        ok, detail, _ = check_package(name)
        summary[name] = detail if ok else None
    return summary
