"""Tests for thermolimit logging configuration.

Tests cover:
- numpy summarization processor
- setup_logging() with and without config
- Subsystem file routing and level overrides
- Log directory fallback
"""

import logging
from pathlib import Path

import numpy as np
import structlog

from thermolimit.logging_config import (
    LOGGER_PREFIX,
    SUBSYSTEMS,
    _summarize_value,
    setup_logging,
    summarize_arrays,
)


class StubConfig:
    """The attributes setup_logging() reads from a Config."""

    def __init__(self, log_dir: Path, level: str = "INFO", subsystem_levels: dict = None):
        self.log_dir = log_dir
        self.logging_level = level
        self.logging_subsystem_levels = subsystem_levels or {}
        self.logging_max_file_size_mb = 1
        self.logging_backup_count = 2


# ---------------------------------------------------------------------------
# summarize_arrays processor
# ---------------------------------------------------------------------------

class TestSummarizeValue:
    """Conversion of single values."""

    def test_numpy_scalar_becomes_python(self):
        value = _summarize_value(np.float64(2.5))
        assert value == 2.5
        assert type(value) is float

    def test_numpy_integer_becomes_int(self):
        assert type(_summarize_value(np.int64(7))) is int

    def test_small_array_becomes_list(self):
        assert _summarize_value(np.array([1, 2, 3])) == [1, 2, 3]

    def test_large_array_becomes_shape_summary(self):
        text = _summarize_value(np.zeros((100, 3)))
        assert "shape=(100, 3)" in text
        assert "float64" in text

    def test_plain_values_pass_through(self):
        assert _summarize_value("cube") == "cube"
        assert _summarize_value(None) is None


class TestSummarizeArrays:
    """The structlog processor on whole event dicts."""

    def test_converts_top_level_values(self):
        event = {"event": "replicas_done", "mean": np.float32(1.0), "replicas": 10}
        out = summarize_arrays(None, "info", event)
        assert out["event"] == "replicas_done"
        assert type(out["mean"]) is float
        assert out["replicas"] == 10

    def test_walks_into_tuples_and_keeps_type(self):
        event = {"event": "x", "sizes": (np.int64(8), np.int64(16))}
        out = summarize_arrays(None, "info", event)
        assert out["sizes"] == (8, 16)
        assert isinstance(out["sizes"], tuple)

    def test_walks_into_dicts(self):
        event = {"event": "x", "ctx": {"cells": np.arange(1000), "n": np.int32(3)}}
        out = summarize_arrays(None, "info", event)
        assert out["ctx"]["n"] == 3
        assert "shape=(1000,)" in out["ctx"]["cells"]


# ---------------------------------------------------------------------------
# setup_logging()
# ---------------------------------------------------------------------------

class TestSetupLogging:
    """Handlers, files and levels."""

    def test_creates_log_directory(self, tmp_path):
        log_dir = tmp_path / "logs"
        setup_logging(StubConfig(log_dir))
        assert log_dir.is_dir()

    def test_combined_file_receives_subsystem_events(self, tmp_path):
        log_dir = tmp_path / "logs"
        setup_logging(StubConfig(log_dir))
        logging.getLogger(f"{LOGGER_PREFIX}.geometry").info("collar_event_42")
        logging.getLogger(f"{LOGGER_PREFIX}.ergodic").info("ergodic_event_43")

        combined = (log_dir / "thermolimit.log").read_text()
        assert "collar_event_42" in combined
        assert "ergodic_event_43" in combined

    def test_one_file_per_subsystem(self, tmp_path):
        log_dir = tmp_path / "logs"
        setup_logging(StubConfig(log_dir))
        for subsystem in SUBSYSTEMS:
            logging.getLogger(f"{LOGGER_PREFIX}.{subsystem}").info(f"hello_{subsystem}")

        for subsystem in SUBSYSTEMS:
            content = (log_dir / f"{subsystem}.log").read_text()
            assert f"hello_{subsystem}" in content

    def test_subsystem_files_do_not_mix(self, tmp_path):
        log_dir = tmp_path / "logs"
        setup_logging(StubConfig(log_dir))
        logging.getLogger(f"{LOGGER_PREFIX}.moments").info("only_moments")
        assert "only_moments" not in (log_dir / "harness.log").read_text()

    def test_subsystem_level_override(self, tmp_path):
        log_dir = tmp_path / "logs"
        setup_logging(StubConfig(log_dir, subsystem_levels={"sampling": "DEBUG"}))
        logging.getLogger(f"{LOGGER_PREFIX}.sampling").debug("debug_sampling")
        logging.getLogger(f"{LOGGER_PREFIX}.stats").debug("debug_stats")

        assert "debug_sampling" in (log_dir / "sampling.log").read_text()
        assert "debug_stats" not in (log_dir / "stats.log").read_text()

    def test_env_level_overrides_config(self, tmp_path, monkeypatch):
        monkeypatch.setenv("THERMOLIMIT_LOG_LEVEL", "DEBUG")
        log_dir = tmp_path / "logs"
        setup_logging(StubConfig(log_dir, level="WARNING"))
        logging.getLogger(f"{LOGGER_PREFIX}.harness").debug("debug_via_env")
        assert "debug_via_env" in (log_dir / "harness.log").read_text()

    def test_fallback_on_bad_log_dir(self, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        setup_logging(StubConfig(blocker / "logs"))
        assert "Cannot create log directory" in capsys.readouterr().err

    def test_summarize_arrays_in_processor_chain(self, tmp_path):
        setup_logging(StubConfig(tmp_path / "logs"))
        names = [getattr(p, "__name__", str(p)) for p in structlog.get_config()["processors"]]
        assert "summarize_arrays" in names

    def test_cache_logger_phases(self, tmp_path):
        setup_logging()
        assert structlog.get_config()["cache_logger_on_first_use"] is False
        setup_logging(StubConfig(tmp_path / "logs"))
        assert structlog.get_config()["cache_logger_on_first_use"] is True
