"""Logging configuration for thermolimit.

Provides subsystem-level log file routing, numpy-aware event
summarization, and structlog + stdlib integration.

Subsystem hierarchy (stdlib dotted names, structlog wraps them):
    root                            → ConsoleHandler (terminal, colored)
      └─ thermolimit                → RotatingFileHandler → thermolimit.log
           ├─ thermolimit.sampling       → RFH → sampling.log
           ├─ thermolimit.stats          → RFH → stats.log
           ├─ thermolimit.moments        → RFH → moments.log
           ├─ thermolimit.geometry       → RFH → geometry.log
           ├─ thermolimit.electrostatics → RFH → electrostatics.log
           ├─ thermolimit.ergodic        → RFH → ergodic.log
           └─ thermolimit.harness        → RFH → harness.log

Console output goes to stderr so that CLI stdout stays machine-readable.
"""

import logging
import logging.handlers
import os
import sys
from pathlib import Path
from typing import Any, Dict

import numpy as np
import structlog

# Subsystem names, each gets its own RotatingFileHandler
SUBSYSTEMS = (
    "sampling",
    "stats",
    "moments",
    "geometry",
    "electrostatics",
    "ergodic",
    "harness",
)

# stdlib logger name prefix for hierarchy-based propagation
LOGGER_PREFIX = "thermolimit"

# Arrays longer than this are logged as a shape summary
_MAX_INLINE_ELEMENTS = 8

# ---------------------------------------------------------------------------
# numpy summarization
# ---------------------------------------------------------------------------


def _summarize_value(value: Any) -> Any:
    """Convert numpy values to plain, short loggable values."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        if value.size <= _MAX_INLINE_ELEMENTS:
            return value.tolist()
        return f"ndarray(shape={value.shape}, dtype={value.dtype})"
    return value


def summarize_arrays(
    logger: Any, method_name: str, event_dict: Dict[str, Any]
) -> Dict[str, Any]:
    """structlog processor that keeps numpy payloads out of log lines.

    Scalars become Python scalars; small arrays become lists; large
    arrays are replaced by their shape and dtype. Walks one level into
    lists, tuples and dicts.
    """
    for key, value in event_dict.items():
        if isinstance(value, (list, tuple)):
            event_dict[key] = type(value)(_summarize_value(v) for v in value)
        elif isinstance(value, dict):
            event_dict[key] = {k: _summarize_value(v) for k, v in value.items()}
        else:
            event_dict[key] = _summarize_value(value)
    return event_dict


# ---------------------------------------------------------------------------
# Logging setup
# ---------------------------------------------------------------------------

def setup_logging(config=None) -> None:
    """Configure structured logging with subsystem file handlers.

    Args:
        config: Optional Config instance. First call (before config loads)
                uses defaults with cache_logger_on_first_use=False.
                Second call (after config loads) uses real config and sets
                cache_logger_on_first_use=True.
    """
    if config is not None:
        log_dir = config.log_dir
        root_level_name = config.logging_level.upper()
        subsystem_levels = config.logging_subsystem_levels
        max_bytes = config.logging_max_file_size_mb * 1024 * 1024
        backup_count = config.logging_backup_count
        cache_loggers = True
    else:
        log_dir = Path(__file__).parent.parent / "logs"
        root_level_name = "INFO"
        subsystem_levels = {}
        max_bytes = 10 * 1024 * 1024  # 10 MB
        backup_count = 5
        cache_loggers = False

    # THERMOLIMIT_LOG_LEVEL env var overrides config (set by --debug flag)
    env_level = os.environ.get("THERMOLIMIT_LOG_LEVEL", "").upper()
    if env_level and hasattr(logging, env_level):
        root_level_name = env_level

    root_level = getattr(logging, root_level_name, logging.INFO)

    file_handlers_ok = False
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handlers_ok = True
    except OSError as exc:
        print(
            f"WARNING: Cannot create log directory {log_dir}: {exc}. "
            "Falling back to console-only logging.",
            file=sys.stderr,
        )

    file_formatter = structlog.stdlib.ProcessorFormatter(
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            structlog.dev.ConsoleRenderer(colors=False),
        ],
    )
    console_formatter = structlog.stdlib.ProcessorFormatter(
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            structlog.dev.ConsoleRenderer(colors=True),
        ],
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)  # Handlers filter by level
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(root_level)
    console_handler.setFormatter(console_formatter)
    root_logger.addHandler(console_handler)

    tl_logger = logging.getLogger(LOGGER_PREFIX)
    tl_logger.setLevel(logging.DEBUG)
    tl_logger.handlers.clear()
    tl_logger.propagate = True

    if file_handlers_ok:
        combined_handler = logging.handlers.RotatingFileHandler(
            log_dir / "thermolimit.log",
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding="utf-8",
        )
        combined_handler.setLevel(root_level)
        combined_handler.setFormatter(file_formatter)
        tl_logger.addHandler(combined_handler)

    for subsystem in SUBSYSTEMS:
        sub_logger = logging.getLogger(f"{LOGGER_PREFIX}.{subsystem}")
        sub_level_name = str(subsystem_levels.get(subsystem, "")).upper()
        sub_level = getattr(logging, sub_level_name, root_level) if sub_level_name else root_level
        sub_logger.setLevel(sub_level)
        sub_logger.handlers.clear()
        sub_logger.propagate = True

        if file_handlers_ok:
            sub_handler = logging.handlers.RotatingFileHandler(
                log_dir / f"{subsystem}.log",
                maxBytes=max_bytes,
                backupCount=backup_count,
                encoding="utf-8",
            )
            sub_handler.setLevel(sub_level)
            sub_handler.setFormatter(file_formatter)
            sub_logger.addHandler(sub_handler)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            summarize_arrays,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=cache_loggers,
    )
