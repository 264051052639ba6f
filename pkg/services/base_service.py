"""
Environment-driven defaults shared by the services.
"""

import logging
import os
from pathlib import Path
from typing import Callable, Optional, Tuple, TypeVar

from pydantic import ValidationError

from lib.errors import ConfigError, FairshareError

logger = logging.getLogger(__name__)

T = TypeVar("T")


def get_out_root() -> Path:
    """Root directory for run outputs and the run catalog."""
    return Path(os.getenv("FAIRSHARE_OUT_DIR", "runs"))


def get_workers() -> int:
    """Worker processes for grid and comparison runs."""
    raw = os.getenv("FAIRSHARE_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("Ignoring non-integer FAIRSHARE_WORKERS=%r", raw)
        return 1


def get_log_level() -> str:
    return os.getenv("FAIRSHARE_LOG_LEVEL", "INFO").upper()


def guarded(action: Callable[[], T]) -> Tuple[Optional[T], Optional[FairshareError]]:
    """
    Run `action`, turning simulator errors into an error value.

    Returns:
        Tuple of (result, error). If an error occurs, result is None.
    """
    try:
        return action(), None
    except ValidationError as e:
        return None, ConfigError(str(e))
    except FairshareError as e:
        return None, e
