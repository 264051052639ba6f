"""
Throughput, dispersion and fairness of a run.

Outcome and action sequences are indexed by slot: element k-1 holds slot k.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lib.env import COLLISION, SUCCESS
from lib.errors import InsufficientHistoryError

logger = logging.getLogger(__name__)


def _window(values: Sequence[int], t: int, window: int) -> np.ndarray:
    if t <= window:
        raise InsufficientHistoryError(
            f"Window of {window} slots needs t > {window}, got t={t}"
        )
    if t - 1 > len(values):
        raise InsufficientHistoryError(f"Only {len(values)} slots recorded, window ends at {t - 1}")
    # slots t-W .. t-1 live at indices t-W-1 .. t-2
    return np.asarray(values[t - window - 1 : t - 1])


def throughput(outcomes: Sequence[int], t: int, window: int = 500) -> float:
    """Fraction of successes over slots t-W..t-1."""
    return float(np.mean(_window(outcomes, t, window) == SUCCESS))


def collision_rate(outcomes: Sequence[int], t: int, window: int = 500) -> float:
    """Fraction of collisions over slots t-W..t-1."""
    return float(np.mean(_window(outcomes, t, window) == COLLISION))


def idle_band_rate(actions: np.ndarray, band: int, t: int, window: int = 500) -> float:
    """
    Fraction of slots t-W..t-1 in which nobody transmitted on `band`.

    `actions` is (slots, M) with row k-1 holding slot k.
    """
    rows = _window(np.asarray(actions), t, window)
    return float(np.mean(~np.any(rows == band, axis=1)))


def throughput_std(finals: Sequence[float]) -> float:
    """Population standard deviation of the final per-agent throughputs."""
    return float(np.std(np.asarray(finals, dtype=float)))


def network_throughput(finals: Sequence[float], num_bands: int) -> float:
    """Sum of per-agent throughputs divided by the number of bands."""
    if num_bands < 1:
        raise ValueError("Number of bands must be positive")
    return float(np.sum(finals)) / num_bands


def jain(finals: Sequence[float]) -> float:
    """(sum x)^2 / (M sum x^2); an all-zero vector counts as perfectly fair."""
    values = np.asarray(finals, dtype=float)
    squares = float(np.sum(values**2))
    if squares == 0.0:
        logger.warning("Jain index of an all-zero throughput vector defined as 1")
        return 1.0
    return float(np.sum(values) ** 2 / (len(values) * squares))


@dataclass(frozen=True)
class Summary:
    sigma: float
    c_bar: float
    jain: float
    throughput_sum: float


def summarize(finals: Sequence[float], num_bands: int) -> Summary:
    return Summary(
        sigma=throughput_std(finals),
        c_bar=network_throughput(finals, num_bands),
        jain=jain(finals),
        throughput_sum=float(np.sum(finals)),
    )


__all__ = [
    "throughput",
    "collision_rate",
    "idle_band_rate",
    "throughput_std",
    "network_throughput",
    "jain",
    "Summary",
    "summarize",
]
