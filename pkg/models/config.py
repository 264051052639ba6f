"""
Configuration models for networks, learning hyper-parameters, rewards and experiments.

All defaults are the values used in every published experiment; scenario
presets (jammer, ad-hoc) only override the exploration schedule.
"""

from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ChannelModel(str, Enum):
    """Interference model of the shared medium."""

    BROADCAST = "broadcast"
    ADHOC = "adhoc"


class AgentKind(str, Enum):
    """Decision policy of one source."""

    FSRL = "fsrl"
    DQN_CP1 = "cp1"
    # Debug policy: never transmits, never trains.
    IDLE = "idle"


class JammerConfig(BaseModel):
    """
    A persistent transmitter occupying one band during [start_slot, end_slot].

    end_slot = start_slot - 1 is an empty window: the jammer never transmits.
    """

    model_config = ConfigDict(frozen=True)

    band: int = Field(..., description="Jammed band (1..N)", ge=1)
    start_slot: int = Field(..., description="First jammed slot", ge=1)
    end_slot: int = Field(..., description="Last jammed slot", ge=0)

    @model_validator(mode="after")
    def _check_window(self):
        if self.start_slot > self.end_slot + 1:
            raise ValueError(
                f"Jammer start_slot {self.start_slot} is after end_slot {self.end_slot}"
            )
        return self

    @property
    def is_empty(self) -> bool:
        return self.end_slot < self.start_slot


class NetworkConfig(BaseModel):
    """M source-destination pairs sharing N orthogonal bands for H slots."""

    model_config = ConfigDict(frozen=True)

    num_agents: int = Field(..., description="Number of sources M", ge=1)
    num_bands: int = Field(..., description="Number of bands N", ge=1)
    channel_model: ChannelModel = Field(
        default=ChannelModel.BROADCAST, description="Interference model"
    )
    horizon: int = Field(default=50_000, description="Episode length H in slots", ge=1)
    jammer: Optional[JammerConfig] = Field(default=None, description="Optional jammer")

    @model_validator(mode="after")
    def _check_jammer(self):
        if self.jammer is not None:
            if self.channel_model == ChannelModel.ADHOC:
                raise ValueError("Jammers are only modeled on the broadcast channel")
            if self.jammer.band > self.num_bands:
                raise ValueError(
                    f"Jammer band {self.jammer.band} exceeds number of bands {self.num_bands}"
                )
            if self.jammer.end_slot > self.horizon:
                raise ValueError(
                    f"Jammer end_slot {self.jammer.end_slot} exceeds horizon {self.horizon}"
                )
        return self


class HyperParams(BaseModel):
    """Learning hyper-parameters shared by every agent of a run."""

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(default=5e-4, description="Base learning rate", gt=0)
    epsilon0: float = Field(default=5e-2, description="Initial epsilon", ge=0, le=1)
    epsilon_decay: float = Field(default=8e-6, description="Epsilon decay per slot", ge=0)
    epsilon_min: float = Field(default=5e-3, description="Minimum epsilon", ge=0, le=1)
    risk_alpha0: float = Field(default=0.5, description="Initial Wang risk value")
    risk_decay: float = Field(default=5e-4, description="Risk decay per training step", ge=0)
    risk_floor: float = Field(default=0.0, description="Lowest risk value reached")
    temporal_length: int = Field(default=15, description="History slots T in the state", ge=1)
    buffer_size: int = Field(default=1500, description="Replay capacity", ge=1)
    target_update_frequency: int = Field(
        default=500, description="Training steps between target syncs", ge=1
    )
    reward_history: int = Field(default=16, description="Reward history length L", ge=1)
    gamma: float = Field(default=0.9, description="Discount factor", gt=0, le=1)
    batch_size: int = Field(default=128, description="Batch size B", ge=1)
    quantile_dim: int = Field(default=128, description="Quantile samples Q_d", ge=1)
    hidden_dim: int = Field(default=64, description="Hidden units D_h", ge=1)
    huber_k: float = Field(default=1.0, description="Huber threshold k", gt=0)
    tdl_beta: float = Field(default=0.1, description="TDL learning-rate floor beta", gt=0, lt=1)
    tdl_sigma_min: float = Field(default=1e-3, description="TDL kernel floor", gt=0)
    clip_norm: Optional[float] = Field(
        default=10.0, description="Global gradient-norm clip (None disables)", gt=0
    )
    action_quantiles: int = Field(
        default=32, description="Quantile samples K_act at decision time", ge=1
    )
    embedding_projection: bool = Field(
        default=False, description="Learned layer after the cosine embedding"
    )

    @model_validator(mode="after")
    def _check_epsilon(self):
        if self.epsilon_min > self.epsilon0:
            raise ValueError("epsilon_min must not exceed epsilon0")
        return self


class RewardParams(BaseModel):
    """Coefficients of the fairness-driven reward."""

    model_config = ConfigDict(frozen=True)

    success_coeff: float = Field(default=0.096, description="Success reward scale")
    collision_coeff: float = Field(default=1.06, description="Collision penalty scale")
    silence_penalty: float = Field(default=0.06, description="Always-silent penalty")
    idle_reward: float = Field(default=0.0516, description="Occasional idle reward")
    history_length: int = Field(default=16, description="Reward history length L", ge=1)
    sharing_amplitude: float = Field(default=0.08, description="Band-sharing sigmoid amplitude")
    sharing_offset: float = Field(default=0.12, description="Band-sharing offset")
    sharing_shift: float = Field(default=5.0, description="Band-sharing sigmoid shift")
    band_sharing: bool = Field(default=True, description="Include the band-sharing term")


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce one run."""

    scenario: str = Field(default="single", description="Scenario label")
    network: NetworkConfig
    hyper: HyperParams = Field(default_factory=HyperParams)
    rewards: RewardParams = Field(default_factory=RewardParams)
    agent_kinds: List[AgentKind] = Field(
        default_factory=list, description="Policy per source; empty means all FSRL"
    )
    seed: int = Field(default=0, description="Run seed", ge=0)
    seeded: bool = Field(
        default=True, description="False draws a fresh seed from OS entropy at start"
    )
    time_reference: bool = Field(default=True, description="Keep the time-bit columns")
    output_dir: Path = Field(default=Path("runs/single"), description="Artifact directory")
    metric_window: int = Field(default=500, description="Throughput window W_t", ge=1)
    pattern_slots: int = Field(default=7, description="Slots in the transmission pattern table", ge=1)
    checkpoint: bool = Field(default=False, description="Save agent checkpoints at the end")

    @model_validator(mode="after")
    def _check_agents(self):
        if not self.agent_kinds:
            self.agent_kinds = [AgentKind.FSRL] * self.network.num_agents
        if len(self.agent_kinds) != self.network.num_agents:
            raise ValueError(
                f"{len(self.agent_kinds)} agent kinds given for {self.network.num_agents} agents"
            )
        if self.hyper.reward_history != self.rewards.history_length:
            raise ValueError(
                f"hyper.reward_history ({self.hyper.reward_history}) and "
                f"rewards.history_length ({self.rewards.history_length}) must agree"
            )
        if self.network.channel_model == ChannelModel.ADHOC and self.network.num_agents < 3:
            raise ValueError("The ad-hoc chain needs at least 3 agents")
        if self.network.horizon <= self.metric_window:
            raise ValueError(
                f"Horizon {self.network.horizon} must exceed the metric window {self.metric_window}"
            )
        return self

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Return a validated copy with top-level fields replaced."""
        data = self.model_dump()
        data.update(changes)
        return ExperimentConfig.model_validate(data)


# Exploration overrides used by the scenario presets.
JAMMER_HYPER_OVERRIDES = {"epsilon_min": 0.01}
ADHOC_HYPER_OVERRIDES = {"epsilon0": 0.4, "epsilon_decay": 1e-4, "epsilon_min": 0.0}


__all__ = [
    "ChannelModel",
    "AgentKind",
    "JammerConfig",
    "NetworkConfig",
    "HyperParams",
    "RewardParams",
    "ExperimentConfig",
    "JAMMER_HYPER_OVERRIDES",
    "ADHOC_HYPER_OVERRIDES",
]
