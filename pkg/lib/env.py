"""
Slotted medium shared by M sources over N orthogonal bands.

An action is a band index in {0..N} (0 = idle); an outcome is 1 (success),
0 (idle) or -1 (collision). Stepping is a pure function of the actions and
the set of jammed bands, so independent episodes can run side by side.
"""

from collections import Counter
from dataclasses import dataclass
from typing import FrozenSet, List, Sequence

from lib.errors import InvalidActionError
from models.config import ChannelModel, NetworkConfig

IDLE = 0
SUCCESS = 1
COLLISION = -1


@dataclass(frozen=True, slots=True)
class SlotRecord:
    """One agent-slot: what the source did at slot t and what happened."""

    slot: int
    action: int
    outcome: int

    def __post_init__(self):
        if self.slot < 1:
            raise ValueError(f"Slot index must be >= 1, got {self.slot}")
        if self.outcome not in (COLLISION, IDLE, SUCCESS):
            raise ValueError(f"Invalid outcome {self.outcome}")
        if (self.action == IDLE) != (self.outcome == IDLE):
            raise ValueError(
                f"Outcome {self.outcome} inconsistent with action {self.action} at slot {self.slot}"
            )


def _validate_actions(actions: Sequence[int], num_bands: int) -> None:
    for agent, action in enumerate(actions, start=1):
        if not 0 <= action <= num_bands:
            raise InvalidActionError(agent, action, num_bands)


def step_broadcast(
    actions: Sequence[int], jammed_bands: FrozenSet[int] | set, num_bands: int
) -> List[int]:
    """
    Resolve one slot of the broadcast channel.

    A transmission succeeds iff it is the only one on its band and the band
    is not jammed.
    """
    _validate_actions(actions, num_bands)
    load = Counter(a for a in actions if a != IDLE)
    outcomes = []
    for action in actions:
        if action == IDLE:
            outcomes.append(IDLE)
        elif load[action] == 1 and action not in jammed_bands:
            outcomes.append(SUCCESS)
        else:
            outcomes.append(COLLISION)
    return outcomes


def step_adhoc(actions: Sequence[int], num_bands: int) -> List[int]:
    """
    Resolve one slot of the ad-hoc chain.

    Agent i < M is received by i+1, so it is disturbed by i+1 and i+2; the
    last agent is received by M-1 and disturbed by M-1 and M-2. Agents
    further apart reuse the same band freely.
    """
    _validate_actions(actions, num_bands)
    m = len(actions)
    outcomes = []
    for i, action in enumerate(actions):
        if action == IDLE:
            outcomes.append(IDLE)
            continue
        if i < m - 1:
            interferers = (i + 1, i + 2)
        else:
            interferers = (i - 1, i - 2)
        clear = all(
            not (0 <= j < m) or actions[j] != action for j in interferers
        )
        outcomes.append(SUCCESS if clear else COLLISION)
    return outcomes


def jammed_bands_at(t: int, config: NetworkConfig) -> FrozenSet[int]:
    """Bands occupied by the jammer during slot t."""
    jammer = config.jammer
    if jammer is not None and jammer.start_slot <= t <= jammer.end_slot:
        return frozenset({jammer.band})
    return frozenset()


class Medium:
    """Binds a NetworkConfig to the matching step function."""

    def __init__(self, config: NetworkConfig):
        self.config = config

    def resolve(self, t: int, actions: Sequence[int]) -> List[int]:
        """Outcomes of slot t for the given joint action."""
        if self.config.channel_model == ChannelModel.ADHOC:
            return step_adhoc(actions, self.config.num_bands)
        return step_broadcast(
            actions, jammed_bands_at(t, self.config), self.config.num_bands
        )


__all__ = [
    "IDLE",
    "SUCCESS",
    "COLLISION",
    "SlotRecord",
    "step_broadcast",
    "step_adhoc",
    "jammed_bands_at",
    "Medium",
]
