"""
Per-source decision loop.

Each Agent sees only its own actions and outcomes. Once per slot it turns the
revealed outcome into a reward, stores the transition, runs at most one
training step and picks the action for the next slot:

    outcome -> reward -> Transition -> replay -> train_step -> select_action

FSRL agents use the fairness-driven reward, risk-distorted quantiles and TDL
learning-rate control. DQN_CP1 agents reuse the same network with a single
fixed quantile at 0.5, no distortion, a constant learning rate and the CP1
reward. IDLE agents never transmit and never train.
"""

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from lib import distrl, neural
from lib.env import IDLE, SlotRecord
from lib.errors import ArtifactIOError, ContractViolationError
from lib.rewards import band_counts, cp1_reward, fsrl_reward
from lib.state_codec import HistoryBuffer, encode_state, state_width
from models.config import AgentKind, HyperParams, RewardParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass(frozen=True)
class SlotLog:
    """What an agent did at one slot, for the event log."""

    slot: int
    action: int
    outcome: int
    reward: float
    epsilon: float
    alpha: float
    learning_rate: float
    loss: Optional[float]


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions stored in preallocated arrays."""

    def __init__(self, capacity: int, state_shape: Tuple[int, int]):
        self.capacity = capacity
        self.state_shape = tuple(state_shape)
        self.states = np.zeros((capacity, *state_shape), dtype=np.int8)
        self.next_states = np.zeros((capacity, *state_shape), dtype=np.int8)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=float)
        self.dones = np.zeros(capacity, dtype=float)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def append(self, transition: Transition) -> None:
        if transition.state.shape != self.state_shape or transition.next_state.shape != self.state_shape:
            raise ContractViolationError(
                f"Transition states {transition.state.shape} do not match buffer shape {self.state_shape}"
            )
        i = self._cursor
        self.states[i] = transition.state
        self.next_states[i] = transition.next_state
        self.actions[i] = transition.action
        self.rewards[i] = transition.reward
        self.dones[i] = float(transition.done)
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._cursor) % self.capacity

    def transitions(self) -> List[Transition]:
        """Stored transitions, oldest first."""
        return [
            Transition(
                state=self.states[i].copy(),
                action=int(self.actions[i]),
                reward=float(self.rewards[i]),
                next_state=self.next_states[i].copy(),
                done=bool(self.dones[i]),
            )
            for i in self._order()
        ]

    def sample(self, rng: np.random.Generator, batch: int):
        """Uniform sample without replacement: states, actions, rewards, next states, dones."""
        idx = self._order()[rng.choice(self._size, size=batch, replace=False)]
        return (
            self.states[idx].astype(float),
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx].astype(float),
            self.dones[idx],
        )

    def arrays(self) -> dict:
        order = self._order()
        return {
            "replay/states": self.states[order],
            "replay/next_states": self.next_states[order],
            "replay/actions": self.actions[order],
            "replay/rewards": self.rewards[order],
            "replay/dones": self.dones[order],
        }

    @classmethod
    def from_arrays(cls, capacity: int, state_shape, arrays: dict) -> "ReplayBuffer":
        buffer = cls(capacity, state_shape)
        for i in range(len(arrays["replay/actions"])):
            buffer.append(
                Transition(
                    state=arrays["replay/states"][i],
                    action=int(arrays["replay/actions"][i]),
                    reward=float(arrays["replay/rewards"][i]),
                    next_state=arrays["replay/next_states"][i],
                    done=bool(arrays["replay/dones"][i]),
                )
            )
        return buffer


def epsilon(step: int, hyper: HyperParams) -> float:
    """Linearly decayed exploration rate, floored at epsilon_min."""
    if step < 0:
        raise ValueError("Step must be non-negative")
    return max(hyper.epsilon_min, hyper.epsilon0 - hyper.epsilon_decay * step)


def chain_digest(previous: str, record: SlotRecord) -> str:
    """Fold one consumed slot into a running SHA-256 chain of an agent's inputs."""
    line = f"{record.slot},{record.action},{record.outcome}\n"
    return hashlib.sha256((previous + line).encode()).hexdigest()


class Agent:
    """One source: its network pair, replay buffer, history and schedules."""

    def __init__(
        self,
        index: int,
        kind: AgentKind,
        num_bands: int,
        horizon: int,
        hyper: HyperParams,
        rewards: RewardParams,
        seed: int,
        time_reference: bool = True,
    ):
        self.index = index
        self.kind = kind
        self.num_bands = num_bands
        self.num_actions = num_bands + 1
        self.horizon = horizon
        self.hyper = hyper
        self.reward_params = rewards
        self.time_reference = time_reference
        self.seed = seed

        self.rng = np.random.default_rng([seed, index])
        self.state_shape = (hyper.temporal_length, state_width(num_bands))
        self.params = neural.init_params(
            self.state_shape[1],
            self.num_actions,
            hyper.hidden_dim,
            self.rng,
            embedding_projection=hyper.embedding_projection,
        )
        self.target = neural.copy_params(self.params)
        self.replay = ReplayBuffer(hyper.buffer_size, self.state_shape)
        self.history = HistoryBuffer(max(hyper.temporal_length, rewards.history_length + 1))

        self.risk = distrl.RiskSchedule(hyper.risk_alpha0, hyper.risk_decay, hyper.risk_floor)
        self.tdl = distrl.TdlParams(hyper.tdl_beta, hyper.learning_rate, hyper.tdl_sigma_min)

        self.t = 1
        self.slot_steps = 0
        self.train_steps = 0
        self.pending_action: Optional[int] = None
        self.decision_epsilon = 0.0
        self.last_log: Optional[SlotLog] = None
        self._state = self._encode(1)
        self._digest = ""

    # ---------- schedules ----------

    @property
    def learns(self) -> bool:
        return self.kind != AgentKind.IDLE

    def epsilon(self) -> float:
        return epsilon(self.slot_steps, self.hyper)

    def alpha(self) -> float:
        if self.kind != AgentKind.FSRL:
            return 0.0
        return distrl.risk_alpha(self.train_steps, self.risk)

    def digest(self) -> str:
        return self._digest

    # ---------- decisions ----------

    def _encode(self, t: int) -> np.ndarray:
        return encode_state(
            self.history, t, self.num_bands, self.hyper.temporal_length, self.time_reference
        )

    def _quantiles(self, batch: int, count: int) -> np.ndarray:
        """Distorted fractions for the current risk value; fixed 0.5 for CP1."""
        if self.kind == AgentKind.DQN_CP1:
            return np.full((batch, 1), 0.5)
        return distrl.wang_transform(distrl.sample_taus(self.rng, batch, count), self.alpha())

    def select_action(self, state: np.ndarray) -> int:
        """Epsilon-greedy over mean-quantile Q-values; ties go to the lowest action."""
        if self.kind == AgentKind.IDLE:
            self.decision_epsilon = 0.0
            return IDLE
        eps = self.epsilon()
        self.decision_epsilon = eps
        if self.rng.random() < eps:
            return int(self.rng.integers(self.num_actions))
        taus = self._quantiles(1, self.hyper.action_quantiles)
        q = neural.q_values(state[None].astype(float), taus, self.params)[0]
        return int(np.argmax(q))

    def begin(self) -> int:
        """Action for slot 1, chosen from the empty history."""
        self.pending_action = self.select_action(self._state)
        return self.pending_action

    # ---------- learning ----------

    def reward_for(self, action: int, outcome: int, t: int) -> float:
        if self.kind == AgentKind.DQN_CP1:
            return cp1_reward(outcome)
        counts = band_counts(self.history, t, self.num_bands, self.reward_params.history_length)
        return fsrl_reward(self.history, action, outcome, t, self.reward_params, counts)

    def observe(self, transition: Transition) -> None:
        self.replay.append(transition)

    def train_step(self) -> Tuple[Optional[float], float]:
        """
        One IQN update once the buffer holds a full batch.

        Returns (loss or None, learning rate used).
        """
        hyper = self.hyper
        if not self.learns or len(self.replay) < hyper.batch_size:
            return None, 0.0
        states, actions, rewards, next_states, dones = self.replay.sample(self.rng, hyper.batch_size)
        if self.kind == AgentKind.DQN_CP1:
            taus_target = self._quantiles(hyper.batch_size, 1)
            taus_pred = taus_target
        else:
            taus_target = self._quantiles(hyper.batch_size, hyper.quantile_dim)
            taus_pred = self._quantiles(hyper.batch_size, hyper.quantile_dim)

        report, grads = distrl.iqn_loss_and_gradients(
            self.params,
            self.target,
            states,
            actions,
            rewards,
            next_states,
            dones,
            taus_target,
            taus_pred,
            hyper.gamma,
            hyper.huber_k,
            hyper.tdl_sigma_min,
        )
        if self.kind == AgentKind.FSRL:
            rate = distrl.modulate_lr(report.likelihood, report.mean_td_error <= 0, self.tdl)
        else:
            rate = hyper.learning_rate
        neural.apply_gradients(self.params, grads, rate, hyper.clip_norm)

        self.train_steps += 1
        if self.train_steps % hyper.target_update_frequency == 0:
            neural.sync_target(self.params, self.target)
            logger.debug("Agent %d synced target at training step %d", self.index, self.train_steps)
        return report.loss, rate

    def act_and_learn_slot(self, outcome: int) -> int:
        """Consume this slot's outcome, learn, and return the action for the next slot."""
        if self.pending_action is None:
            raise ContractViolationError("begin() must be called before the first slot")
        t = self.t
        action = self.pending_action
        record = SlotRecord(t, action, outcome)
        self._digest = chain_digest(self._digest, record)

        reward = self.reward_for(action, outcome, t)
        state = self._state
        self.history.append(record)
        next_state = self._encode(t + 1)
        self.observe(Transition(state, action, reward, next_state, done=t == self.horizon))

        alpha = self.alpha()
        decision_epsilon = self.decision_epsilon
        loss, rate = self.train_step()

        self.t += 1
        self.slot_steps += 1
        self._state = next_state
        self.pending_action = self.select_action(next_state)
        self.last_log = SlotLog(t, action, outcome, reward, decision_epsilon, alpha, rate, loss)
        return self.pending_action

    # ---------- checkpoints ----------

    def save(self, path: Path) -> Path:
        """Params, target, replay contents and counters in one checkpoint."""
        tensors = {f"online/{k}": v for k, v in self.params.items()}
        tensors.update({f"target/{k}": v for k, v in self.target.items()})
        tensors.update(self.replay.arrays())
        header = {
            "agent": {
                "index": self.index,
                "kind": self.kind.value,
                "num_bands": self.num_bands,
                "horizon": self.horizon,
                "seed": self.seed,
                "time_reference": self.time_reference,
                "t": self.t,
                "slot_steps": self.slot_steps,
                "train_steps": self.train_steps,
                "pending_action": self.pending_action,
                "decision_epsilon": self.decision_epsilon,
                "history": [[r.slot, r.action, r.outcome] for r in self.history],
                "rng_state": self.rng.bit_generator.state,
                "digest": self._digest,
            },
            "hyper": self.hyper.model_dump(),
            "rewards": self.reward_params.model_dump(),
        }
        return neural.save_checkpoint(tensors, path, header)

    @classmethod
    def load(cls, path: Path) -> "Agent":
        tensors, header = neural.load_checkpoint(path)
        meta = header.get("agent")
        if meta is None:
            raise ArtifactIOError(Path(path), "not an agent checkpoint")
        agent = cls(
            index=meta["index"],
            kind=AgentKind(meta["kind"]),
            num_bands=meta["num_bands"],
            horizon=meta["horizon"],
            hyper=HyperParams.model_validate(header["hyper"]),
            rewards=RewardParams.model_validate(header["rewards"]),
            seed=meta["seed"],
            time_reference=meta["time_reference"],
        )
        agent.params = {k.split("/", 1)[1]: v for k, v in tensors.items() if k.startswith("online/")}
        agent.target = {k.split("/", 1)[1]: v for k, v in tensors.items() if k.startswith("target/")}
        agent.replay = ReplayBuffer.from_arrays(agent.hyper.buffer_size, agent.state_shape, tensors)
        for slot, action, outcome in meta["history"]:
            agent.history.append(SlotRecord(slot, action, outcome))
        agent.t = meta["t"]
        agent.slot_steps = meta["slot_steps"]
        agent.train_steps = meta["train_steps"]
        agent.pending_action = meta["pending_action"]
        agent.decision_epsilon = meta["decision_epsilon"]
        agent.rng.bit_generator.state = meta["rng_state"]
        agent._digest = meta["digest"]
        agent._state = agent._encode(agent.t)
        return agent


def build_agents(
    kinds: List[AgentKind],
    num_bands: int,
    horizon: int,
    hyper: HyperParams,
    rewards: RewardParams,
    seed: int,
    time_reference: bool = True,
) -> List[Agent]:
    return [
        Agent(m, kind, num_bands, horizon, hyper, rewards, seed, time_reference)
        for m, kind in enumerate(kinds)
    ]


__all__ = [
    "Transition",
    "SlotLog",
    "ReplayBuffer",
    "Agent",
    "epsilon",
    "chain_digest",
    "build_agents",
]
