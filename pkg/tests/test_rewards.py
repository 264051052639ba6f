import math

import numpy as np
import pytest
from scipy.stats import logistic

from lib.env import SlotRecord
from lib.rewards import band_counts, band_sharing, cp1_reward, fsrl_reward, weight
from lib.state_codec import HistoryBuffer
from models.config import RewardParams

L = 16


def history_of(records, capacity=L + 1):
    return HistoryBuffer.from_records([SlotRecord(*r) for r in records], capacity)


def test_weight_without_activity_is_zero():
    assert weight(HistoryBuffer(L + 1), 1, t=10, history_length=L) == 0.0
    history = history_of([(9, 2, 1)])
    assert weight(history, 1, t=10, history_length=L) == 0.0


def test_weight_single_recent_success():
    history = history_of([(9, 1, 1)])
    assert weight(history, 1, t=10, history_length=L) == pytest.approx(0.5 / (1 - 2**-16), abs=1e-12)
    assert weight(history, 1, t=10, history_length=L) == pytest.approx(0.5000076, abs=1e-7)


def test_weight_full_window_is_one():
    history = history_of([(k, 1, 1) for k in range(1, 17)])
    assert weight(history, 1, t=17, history_length=L) == pytest.approx(1.0, abs=1e-12)


def test_weight_counts_collisions_and_is_bounded():
    rng = np.random.default_rng(0)
    for _ in range(50):
        records = []
        for k in range(1, 30):
            a = int(rng.integers(3))
            records.append((k, a, 0 if a == 0 else int(rng.choice([-1, 1]))))
        history = history_of(records, capacity=40)
        w = weight(history, 1, 30, L)
        assert 0.0 <= w <= 1.0


def test_weight_monotone_in_recent_activity():
    fewer = history_of([(k, 1, 1) for k in range(10, 17)])
    more = history_of([(k, 1, 1) for k in range(5, 17)])
    assert weight(more, 1, 17, L) >= weight(fewer, 1, 17, L)


def amplitude(n):
    return 0.08 * logistic.cdf(n - 5) + 0.12


def test_band_sharing_single_band_is_zero():
    assert band_sharing(np.array([16]), 1, L) == 0.0


def test_band_sharing_even_split():
    assert amplitude(2) == pytest.approx(0.08 / (1 + math.exp(3)) + 0.12, abs=1e-15)
    assert band_sharing(np.array([8, 8]), 2, L) == pytest.approx(amplitude(2), abs=1e-12)
    assert band_sharing(np.array([8, 8]), 2, L) == pytest.approx(0.12381, abs=5e-5)


def test_band_sharing_monopolized_band():
    expected = amplitude(2) * math.sqrt(17) / 9
    assert band_sharing(np.array([16, 0]), 2, L) == pytest.approx(expected, abs=1e-12)
    assert band_sharing(np.array([16, 0]), 2, L) == pytest.approx(0.05672, abs=5e-5)


def test_band_sharing_maximized_by_even_counts():
    rng = np.random.default_rng(1)
    for n in (2, 3, 4, 8):
        total = L - (L % n)
        even = band_sharing(np.full(n, total // n), n, L)
        for _ in range(30):
            counts = rng.multinomial(total, np.ones(n) / n)
            assert band_sharing(counts, n, L) <= even + 1e-12


def test_band_sharing_bounded():
    rng = np.random.default_rng(2)
    for n in range(1, 65):
        counts = rng.multinomial(L, np.ones(n) / n)
        assert 0.0 <= band_sharing(counts, n, L) <= 0.2


def test_band_counts_count_transmissions_regardless_of_outcome():
    history = history_of([(1, 1, 1), (2, 1, -1), (3, 2, 1), (4, 0, 0)])
    np.testing.assert_array_equal(band_counts(history, 5, 3, L), [2, 1, 0])


def test_success_branch_single_band():
    params = RewardParams()
    history = history_of([])
    reward = fsrl_reward(history, 1, 1, 1, params, band_counts(history, 1, 1, L))
    assert reward == pytest.approx(0.096, abs=1e-12)


def test_collision_branch_full_weight():
    params = RewardParams()
    history = history_of([(k, 1, 1) for k in range(1, 17)])
    reward = fsrl_reward(history, 1, -1, 17, params, band_counts(history, 17, 1, L))
    assert reward == pytest.approx(-1.06, abs=1e-12)


def test_silent_branch_after_long_idle():
    params = RewardParams()
    history = history_of([(k, 0, 0) for k in range(1, 17)])
    reward = fsrl_reward(history, 0, 0, 17, params, band_counts(history, 17, 2, L))
    assert reward == pytest.approx(-0.06, abs=1e-12)


def test_idle_branch_after_recent_transmission():
    params = RewardParams()
    history = history_of([(k, 0, 0) for k in range(1, 16)] + [(16, 1, 1)])
    reward = fsrl_reward(history, 0, 0, 17, params, band_counts(history, 17, 2, L))
    assert reward == pytest.approx(0.0516, abs=1e-12)


def test_success_reward_with_band_sharing():
    params = RewardParams()
    history = history_of([(k, 1 + k % 2, 1) for k in range(1, 17)])
    counts = band_counts(history, 17, 2, L)
    w = weight(history, 1, 17, L)
    expected = 0.096 * (1 - w) + band_sharing(counts, 2, L, params)
    assert fsrl_reward(history, 1, 1, 17, params, counts) == pytest.approx(expected, abs=1e-12)

    without = RewardParams(band_sharing=False)
    assert fsrl_reward(history, 1, 1, 17, without, counts) == pytest.approx(0.096 * (1 - w), abs=1e-12)


def test_success_decreasing_and_collision_increasing_in_weight():
    params = RewardParams()
    counts = np.array([4, 4])
    light = history_of([(16, 1, 1)])
    heavy = history_of([(k, 1, 1) for k in range(10, 17)])
    assert fsrl_reward(heavy, 1, 1, 17, params, counts) < fsrl_reward(light, 1, 1, 17, params, counts)
    assert fsrl_reward(heavy, 1, -1, 17, params, counts) < fsrl_reward(light, 1, -1, 17, params, counts)


@pytest.mark.parametrize("outcome,expected", [(1, 3.0), (-1, -1.0), (0, 0.0)])
def test_cp1_reward(outcome, expected):
    assert cp1_reward(outcome) == expected
