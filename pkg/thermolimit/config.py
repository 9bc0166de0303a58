"""Configuration management for thermolimit.

Loads YAML settings (settings.yaml) and environment variables (.env)
into a typed Config object. Property getters provide safe access with
defaults for logging, worker threads, Monte Carlo batching and the
numerical defaults shared by the experiment modules.

Key classes:
    Config: Central configuration manager.

Key functions:
    get_config: Singleton accessor for the global Config instance.
"""

import os
from pathlib import Path
from typing import Any, List, Optional

import structlog
import yaml
from dotenv import load_dotenv

logger = structlog.get_logger("thermolimit.harness")


class Config:
    """Central configuration manager for thermolimit.

    Loads settings.yaml and .env from the config directory. Values are
    read lazily through typed properties; bad types fall back to the
    default with a logged ``config_invalid_value`` event.

    Args:
        config_dir: Path to the config directory. Defaults to
            ``$THERMOLIMIT_CONFIG_DIR`` or ``<repo_root>/config/``.
    """

    def __init__(self, config_dir: Optional[Path] = None):
        if config_dir is None:
            env_dir = os.environ.get("THERMOLIMIT_CONFIG_DIR")
            config_dir = Path(env_dir) if env_dir else Path(__file__).parent.parent / "config"
        self.config_dir = Path(config_dir)

        env_file = self.config_dir / ".env"
        if env_file.exists():
            load_dotenv(env_file)

        self.settings = self._load_yaml("settings.yaml")

    def _load_yaml(self, filename: str) -> dict:
        """Load a YAML configuration file."""
        filepath = self.config_dir / filename
        if filepath.exists():
            with open(filepath, "r") as f:
                loaded = yaml.safe_load(f) or {}
            if not isinstance(loaded, dict):
                logger.error("config_not_a_mapping", file=str(filepath))
                return {}
            return loaded
        return {}

    def _section(self, name: str) -> dict:
        section = self.settings.get(name, {})
        return section if isinstance(section, dict) else {}

    def _number(self, section: str, key: str, default: Any, kind: type = float) -> Any:
        """Read a numeric setting, falling back to ``default`` on bad input."""
        value = self._section(section).get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            logger.error("config_invalid_value", key=f"{section}.{key}", value=value)
            return default
        return kind(value)

    def validate(self):
        """Validate settings at startup.

        Logs errors but does not raise; every accessor has a safe default.
        """
        if self.default_threads < 1:
            logger.error("config_invalid_value", key="execution.threads", valid=">= 1")
        if not 0.5 < self.confidence_level < 1:
            logger.error(
                "config_invalid_value",
                key="monte_carlo.confidence_level",
                value=self.confidence_level,
                valid="(0.5, 1)",
            )
        if self.truncation_epsilon <= 0:
            logger.error("config_invalid_value", key="statistics.epsilon", valid="> 0")
        if any(p <= 0 for p in self.p_list):
            logger.error("config_invalid_value", key="statistics.p_list", valid="all > 0")
        if self.tail_sigmas < 4:
            logger.warning("tail_cutoff_small", tail_sigmas=self.tail_sigmas)

    # --- Logging -------------------------------------------------------

    @property
    def log_dir(self) -> Path:
        """Get log directory path."""
        configured = self.settings.get("log_dir")
        if configured:
            return Path(configured).expanduser()
        return Path(__file__).parent.parent / "logs"

    @property
    def logging_level(self) -> str:
        """Global log level (default INFO). Controls console and combined file."""
        return self._section("logging").get("level", "INFO")

    @property
    def logging_subsystem_levels(self) -> dict:
        """Per-subsystem log level overrides. E.g. {"moments": "DEBUG"}."""
        levels = self._section("logging").get("subsystem_levels", {})
        return levels if isinstance(levels, dict) else {}

    @property
    def logging_max_file_size_mb(self) -> int:
        """Max size per log file in MB before rotation (default 10)."""
        return self._number("logging", "max_file_size_mb", 10, int)

    @property
    def logging_backup_count(self) -> int:
        """Number of rotated log files to keep (default 5)."""
        return self._number("logging", "backup_count", 5, int)

    # --- Execution -----------------------------------------------------

    @property
    def default_threads(self) -> int:
        """Worker threads for replica sweeps. Env var THERMOLIMIT_THREADS wins."""
        env = os.environ.get("THERMOLIMIT_THREADS")
        if env:
            try:
                return int(env)
            except ValueError:
                logger.error("config_invalid_value", key="THERMOLIMIT_THREADS", value=env)
        return self._number("execution", "threads", 1, int)

    @property
    def batch_size(self) -> int:
        """Replicas per vectorized batch (default 2048)."""
        return max(1, self._number("execution", "batch_size", 2048, int))

    # --- Monte Carlo defaults ------------------------------------------

    @property
    def confidence_level(self) -> float:
        """Two-sided CLT confidence level (default 0.99)."""
        return self._number("monte_carlo", "confidence_level", 0.99)

    @property
    def min_tail_hits(self) -> int:
        """Hits below which a tail bin is flagged as thin (default 50)."""
        return self._number("monte_carlo", "min_tail_hits", 50, int)

    @property
    def origin_neighborhood(self) -> int:
        """Half-width in cells of the origin-cell sampling block (default 4, i.e. 9³)."""
        return self._number("monte_carlo", "origin_neighborhood", 4, int)

    # --- Statistics defaults -------------------------------------------

    @property
    def truncation_epsilon(self) -> float:
        """Cap ε of the truncated distance δ′ = min(δ, ε) (default 0.5)."""
        return self._number("statistics", "epsilon", 0.5)

    @property
    def p_list(self) -> List[float]:
        """Exponents p of the truncated statistics X′_p (default [1, 2])."""
        values = self._section("statistics").get("p_list", [1.0, 2.0])
        if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
        ):
            logger.error("config_invalid_value", key="statistics.p_list", value=values)
            return [1.0, 2.0]
        return [float(v) for v in values]

    @property
    def tail_sigmas(self) -> float:
        """Gaussian displacement cutoff in units of σ (default 8)."""
        return self._number("sampling", "tail_sigmas", 8.0)

    # --- Geometry defaults ---------------------------------------------

    @property
    def cone_directions(self) -> int:
        """Size of the direction codebook used by the cone audit (default 482)."""
        return self._number("geometry", "cone_directions", 482, int)


# Global config instance
_config: Optional[Config] = None


def get_config() -> Config:
    """Get or create the global config instance."""
    global _config
    if _config is None:
        _config = Config()
    return _config
