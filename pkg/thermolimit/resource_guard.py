"""Resource guard -- sizes the worker pool for replica sweeps.

Uses psutil to check memory and CPU before a sweep fans out over
worker threads. Falls back gracefully if psutil is unavailable.

Key classes:
    ResourceStatus: Dataclass snapshot of a resource check result.

Key functions:
    check_resources: Perform a single resource check.
    resolve_threads: Cap a requested worker count by the snapshot.

Constants:
    MAX_MEMORY_PERCENT: Run single-threaded above this threshold (90%).
    MIN_AVAILABLE_MB: Free RAM budgeted per worker (256 MB).
"""

from dataclasses import asdict, dataclass
from typing import Optional

import structlog

logger = structlog.get_logger("thermolimit.harness")

# Thresholds
MAX_MEMORY_PERCENT = 90
MIN_AVAILABLE_MB = 256


@dataclass
class ResourceStatus:
    """Snapshot result of a system resource check.

    Attributes:
        ok: True if resources are sufficient to run parallel workers.
        memory_percent: Current memory usage percentage.
        memory_available_mb: Free memory in megabytes.
        cpu_count: Number of logical CPUs.
        reason: Human-readable explanation when ok is False.
    """
    ok: bool
    memory_percent: float
    memory_available_mb: float
    cpu_count: int
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def check_resources() -> ResourceStatus:
    """Check whether the host can run parallel workers.

    Uses psutil if available, falls back gracefully.
    """
    try:
        import psutil
        mem = psutil.virtual_memory()
        memory_percent = float(mem.percent)
        memory_available_mb = mem.available / (1024 * 1024)
        cpu_count = psutil.cpu_count() or 1

        ok = True
        reason = ""
        if memory_percent > MAX_MEMORY_PERCENT:
            ok = False
            reason = f"Memory usage too high: {memory_percent:.1f}%"
        elif memory_available_mb < MIN_AVAILABLE_MB:
            ok = False
            reason = f"Available memory too low: {memory_available_mb:.0f}MB"

        return ResourceStatus(
            ok=ok,
            memory_percent=memory_percent,
            memory_available_mb=memory_available_mb,
            cpu_count=cpu_count,
            reason=reason,
        )
    except ImportError:
        logger.warning("psutil_not_installed", msg="Resource checks disabled")
        return ResourceStatus(
            ok=True,
            memory_percent=0.0,
            memory_available_mb=0.0,
            cpu_count=1,
            reason="psutil not installed, checks disabled",
        )
    except Exception as e:
        logger.warning("resource_check_error", error=str(e))
        return ResourceStatus(
            ok=True,
            memory_percent=0.0,
            memory_available_mb=0.0,
            cpu_count=1,
            reason=f"Check failed: {e}",
        )


def resolve_threads(requested: Optional[int] = None) -> int:
    """Number of worker threads to use for a sweep.

    ``requested`` falls back to the configured default. The result never
    exceeds the CPU count, and drops to 1 when memory is short. Output
    values never depend on it, only wall-clock time does.
    """
    if requested is None:
        from .config import get_config

        requested = get_config().default_threads
    requested = max(1, int(requested))

    status = check_resources()
    if not status.ok:
        logger.warning("threads_reduced", requested=requested, reason=status.reason)
        return 1
    if status.memory_available_mb > 0:
        by_memory = max(1, int(status.memory_available_mb // MIN_AVAILABLE_MB))
        requested = min(requested, by_memory)
    return max(1, min(requested, status.cpu_count))
