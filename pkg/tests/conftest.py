"""
Shared fixtures: tiny networks and short runs that finish in seconds.
"""

from pathlib import Path

import pytest

from models.config import AgentKind, ExperimentConfig, HyperParams, NetworkConfig


@pytest.fixture
def tiny_hyper() -> HyperParams:
    return HyperParams(
        hidden_dim=8,
        quantile_dim=4,
        temporal_length=5,
        batch_size=8,
        buffer_size=32,
        action_quantiles=4,
        target_update_frequency=10,
    )


@pytest.fixture
def out_root(tmp_path, monkeypatch) -> Path:
    root = tmp_path / "runs"
    monkeypatch.setenv("FAIRSHARE_OUT_DIR", str(root))
    return root


@pytest.fixture
def make_config(tmp_path, tiny_hyper):
    """Factory for short, fast experiment configs."""

    def build(
        num_agents: int = 2,
        num_bands: int = 2,
        horizon: int = 120,
        kind: AgentKind = AgentKind.FSRL,
        name: str = "run",
        **changes,
    ) -> ExperimentConfig:
        network = changes.pop("network", {})
        return ExperimentConfig(
            network=NetworkConfig(
                num_agents=num_agents, num_bands=num_bands, horizon=horizon, **network
            ),
            hyper=changes.pop("hyper", tiny_hyper),
            agent_kinds=[kind] * num_agents,
            output_dir=tmp_path / name,
            metric_window=changes.pop("metric_window", 20),
            **changes,
        )

    return build
