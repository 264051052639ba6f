"""
Rewards computed from a source's own history only.

`fsrl_reward` is the fairness-driven reward: a success is worth less the more
the agent recently succeeded on the same band, a collision costs more, and a
bonus rewards spreading transmissions across bands. `cp1_reward` is the fixed
+3/-1/0 collision-penalty reward of the DQN baseline.
"""

import math

import numpy as np
from scipy.special import expit

from lib.env import COLLISION, IDLE, SUCCESS
from lib.state_codec import HistoryBuffer
from models.config import RewardParams


def weight(history: HistoryBuffer, current_band: int, t: int, history_length: int) -> float:
    """
    Recency-weighted activity on `current_band` over slots t-L..t-1, in [0, 1].

    Each past slot k on the same band with a non-idle outcome contributes
    2^(k-t); the sum is divided by its maximum 1 - 2^-L.
    """
    total = 0.0
    for record in history.window(t - history_length, t - 1):
        if record.action == current_band and record.outcome != IDLE:
            total += 2.0 ** (record.slot - t)
    return total / (1.0 - 2.0 ** (-history_length))


def band_counts(history: HistoryBuffer, t: int, num_bands: int, history_length: int) -> np.ndarray:
    """Transmissions per band (index n-1 for band n) over slots t-L..t-1."""
    counts = np.zeros(num_bands, dtype=np.int64)
    for record in history.window(t - history_length, t - 1):
        if record.action != IDLE:
            counts[record.action - 1] += 1
    return counts


def band_sharing(
    counts: np.ndarray,
    num_bands: int,
    history_length: int,
    params: RewardParams | None = None,
) -> float:
    """
    Bonus for even use of the bands: a sigmoid-in-N amplitude times the
    geometric mean of (B[n] + 1), normalized by its value for an even split
    of L transmissions and clamped to 1.
    """
    params = params or RewardParams()
    if num_bands == 1:
        return 0.0
    amplitude = (
        params.sharing_amplitude * expit(num_bands - params.sharing_shift)
        + params.sharing_offset
    )
    geometric = math.exp(np.mean(np.log(np.asarray(counts, dtype=float) + 1.0)))
    g = min(1.0, geometric / (history_length / num_bands + 1.0))
    return amplitude * g


def fsrl_reward(
    history: HistoryBuffer,
    action: int,
    outcome: int,
    t: int,
    params: RewardParams,
    counts: np.ndarray,
) -> float:
    """Fairness-driven reward for slot t, given the history of slots before t."""
    length = params.history_length
    if outcome == SUCCESS:
        w = weight(history, action, t, length)
        bonus = band_sharing(counts, len(counts), length, params) if params.band_sharing else 0.0
        return params.success_coeff * (1.0 - w) + bonus
    if outcome == COLLISION:
        return -params.collision_coeff * weight(history, action, t, length)
    silent = action == IDLE and all(
        record.action == IDLE for record in history.window(t - length, t - 1)
    )
    return -params.silence_penalty if silent else params.idle_reward


def cp1_reward(outcome: int) -> float:
    """+3 for a success, -1 for a collision, 0 when idle."""
    if outcome == SUCCESS:
        return 3.0
    if outcome == COLLISION:
        return -1.0
    return 0.0


__all__ = ["weight", "band_counts", "band_sharing", "fsrl_reward", "cp1_reward"]
