"""
Augmented state of a source: its own last T slots, each described by a 4-bit
time reference, a one-hot band choice and the raw outcome.

Layout of one row (columns), identical to the published state table read
slot by slot:

    [bit3 (MSB), bit2, bit1, bit0 (LSB), band N, ..., band 1, outcome]

Rows run from the oldest slot t-T to the newest slot t-1.
"""

from collections import deque
from typing import Iterable, List, Optional, Tuple

import numpy as np

from lib.env import IDLE, SlotRecord

TIME_BITS = 4
TIME_MODULUS = 1 << TIME_BITS


def state_width(num_bands: int) -> int:
    """Columns D of the augmented state."""
    return TIME_BITS + num_bands + 1


class HistoryBuffer:
    """Ring of one agent's most recent SlotRecords, contiguous in slot order."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("History capacity must be positive")
        self.capacity = capacity
        self._records: deque[SlotRecord] = deque(maxlen=capacity)

    def append(self, record: SlotRecord) -> None:
        if self._records and record.slot != self._records[-1].slot + 1:
            raise ValueError(
                f"Slot {record.slot} does not follow slot {self._records[-1].slot}"
            )
        self._records.append(record)

    def get(self, slot: int) -> Optional[SlotRecord]:
        """Record of the given slot, or None if it is outside the ring."""
        if not self._records:
            return None
        offset = self._records[-1].slot - slot
        if offset < 0 or offset >= len(self._records):
            return None
        return self._records[len(self._records) - 1 - offset]

    def window(self, start: int, end: int) -> List[SlotRecord]:
        """Stored records with start <= slot <= end, oldest first."""
        return [r for r in self._records if start <= r.slot <= end]

    def __iter__(self):
        return iter(self._records)

    def __len__(self) -> int:
        return len(self._records)

    @classmethod
    def from_records(cls, records: Iterable[SlotRecord], capacity: int) -> "HistoryBuffer":
        buffer = cls(capacity)
        for record in records:
            buffer.append(record)
        return buffer


def binary_time_ref(k: int) -> Tuple[int, int, int, int]:
    """mod(k, 16) as four bits, MSB first."""
    if k < 1:
        raise ValueError(f"Slot index must be >= 1, got {k}")
    value = k % TIME_MODULUS
    return tuple((value >> shift) & 1 for shift in range(TIME_BITS - 1, -1, -1))


def encode_state(
    history: HistoryBuffer,
    t: int,
    num_bands: int,
    temporal_length: int,
    time_reference: bool = True,
) -> np.ndarray:
    """
    Build the T x D augmented state observed before acting at slot t.

    Slots before the episode start (k < 1) are all-zero rows. With
    `time_reference=False` the time-bit columns stay zero.
    """
    if t < 1:
        raise ValueError(f"Slot index must be >= 1, got {t}")
    state = np.zeros((temporal_length, state_width(num_bands)), dtype=np.int8)
    for row, k in enumerate(range(t - temporal_length, t)):
        if k < 1:
            continue
        record = history.get(k)
        if record is None:
            continue
        if time_reference:
            state[row, :TIME_BITS] = binary_time_ref(k)
        if record.action != IDLE:
            state[row, TIME_BITS + num_bands - record.action] = 1
        state[row, -1] = record.outcome
    return state


def decode_actions(state: np.ndarray, num_bands: int) -> List[int]:
    """Band choices encoded in a state, oldest slot first (0 = idle)."""
    bands = state[:, TIME_BITS : TIME_BITS + num_bands]
    actions = []
    for row in bands:
        hot = np.flatnonzero(row)
        actions.append(int(num_bands - hot[0]) if hot.size else IDLE)
    return actions


__all__ = [
    "TIME_BITS",
    "HistoryBuffer",
    "state_width",
    "binary_time_ref",
    "encode_state",
    "decode_actions",
]
