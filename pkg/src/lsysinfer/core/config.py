"""Runtime configuration read from the environment (and an optional .env file)."""

import logging
import os
from pathlib import Path
from typing import Optional

import psutil
from dotenv import load_dotenv

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
LP_BACKENDS = ("simplex", "highs")


def _find_dotenv() -> Path | None:
    """Find .env file by searching up from current directory."""
    current = Path.cwd()
    for parent in [current, *current.parents]:
        env_file = parent / ".env"
        if env_file.is_file():
            return env_file
    return None


# Load environment variables early so RuntimeConfig picks them up
load_dotenv(dotenv_path=_find_dotenv())

logger = logging.getLogger(__name__)


class RuntimeConfig:
    """Process-wide settings: worker count, log level and LP backend."""

    def __init__(self) -> None:
        self.threads_raw: Optional[str] = os.environ.get("LSYSINFER_THREADS")
        self.log_level: str = os.environ.get("LSYSINFER_LOG_LEVEL", "WARNING").upper()
        self.lp_backend: str = os.environ.get("LSYSINFER_LP_BACKEND", "simplex").lower()

    def validate(self) -> None:
        """Validate the environment variables that are set."""
        problems = []

        if self.threads_raw is not None:
            try:
                if int(self.threads_raw) < 1:
                    problems.append("LSYSINFER_THREADS must be a positive integer")
            except ValueError:
                problems.append("LSYSINFER_THREADS must be a positive integer")

        if self.log_level not in LOG_LEVELS:
            problems.append(f"LSYSINFER_LOG_LEVEL must be one of: {', '.join(LOG_LEVELS)}")

        if self.lp_backend not in LP_BACKENDS:
            problems.append(f"LSYSINFER_LP_BACKEND must be one of: {', '.join(LP_BACKENDS)}")

        if problems:
            raise ValueError(
                "Invalid lsysinfer environment configuration: "
                f"{'; '.join(problems)}. "
                "Please fix these in your environment or .env file."
            )

    @property
    def threads(self) -> int:
        """Worker count; defaults to the number of logical CPUs."""
        if self.threads_raw is not None:
            return int(self.threads_raw)
        return psutil.cpu_count(logical=True) or 1


def resolve_threads(override: Optional[int] = None) -> int:
    """Worker count from an explicit override or the environment."""
    if override is not None:
        if override < 1:
            raise ValueError("thread count must be at least 1")
        return override
    config = RuntimeConfig()
    config.validate()
    return config.threads


def configure_logging(level: Optional[str] = None) -> None:
    """Send log records to stderr at the configured level."""
    config = RuntimeConfig()
    chosen = (level or config.log_level).upper()
    if chosen not in LOG_LEVELS:
        raise ValueError(f"Invalid log level '{chosen}'. Must be one of: {', '.join(LOG_LEVELS)}")
    logging.basicConfig(
        level=getattr(logging, chosen),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logger.debug("Logging configured at %s", chosen)


def default_lp_backend() -> str:
    """LP backend named by LSYSINFER_LP_BACKEND, "simplex" when unset."""
    backend = RuntimeConfig().lp_backend
    if backend not in LP_BACKENDS:
        raise ValueError(
            f"Invalid LP backend '{backend}'. Must be one of: {', '.join(LP_BACKENDS)}"
        )
    return backend
