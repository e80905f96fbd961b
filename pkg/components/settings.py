import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

DEFAULT_DB_URL = "sqlite:///./kickctl.db"


@dataclass(frozen=True)
class Settings:
    threads: int = 0
    db_url: str | None = None
    log_level: str = "WARNING"

    def worker_count(self) -> int:
        """Resolve ``threads`` (0 = auto) to a concrete positive worker count."""
        if self.threads > 0:
            return self.threads
        return max(1, os.cpu_count() or 1)


def load_settings() -> Settings:
    """Read KICKCTL_* variables, after merging a local ``.env`` if one exists."""
    load_dotenv()

    raw_threads = os.getenv("KICKCTL_THREADS", "0").strip() or "0"
    try:
        threads = int(raw_threads)
    except ValueError:
        logger.warning("Ignoring non-integer KICKCTL_THREADS=%r; using auto", raw_threads)
        threads = 0
    if threads < 0:
        logger.warning("KICKCTL_THREADS=%d is negative; using auto", threads)
        threads = 0

    return Settings(
        threads=threads,
        db_url=os.getenv("KICKCTL_DB_URL") or None,
        log_level=os.getenv("KICKCTL_LOG_LEVEL", "WARNING").upper(),
    )
