import pytest
from pydantic import ValidationError
from sqlalchemy import Column, Integer

from models import Base, CatalogSchema, CatalogTable, catalog_columns
from models.config import ExperimentConfig, HyperParams, JammerConfig, NetworkConfig, RewardParams
from models.run import RunDB, RunSchema
from models.transformations import pydantic_to_sqlalchemy, sqlalchemy_to_pydantic


def network(**changes):
    return {"num_agents": 3, "num_bands": 2, "horizon": 1000, **changes}


def test_defaults_follow_published_hyper_parameters():
    hyper = HyperParams()
    assert (hyper.learning_rate, hyper.gamma, hyper.batch_size) == (5e-4, 0.9, 128)
    assert (hyper.temporal_length, hyper.buffer_size, hyper.target_update_frequency) == (15, 1500, 500)
    assert (hyper.epsilon0, hyper.epsilon_decay, hyper.epsilon_min) == (0.05, 8e-6, 0.005)
    assert RewardParams().history_length == hyper.reward_history == 16


def test_empty_kinds_mean_fsrl_everywhere():
    config = ExperimentConfig(network=NetworkConfig(**network()))
    assert [k.value for k in config.agent_kinds] == ["fsrl"] * 3


@pytest.mark.parametrize(
    "data",
    [
        {"network": network(), "agent_kinds": ["fsrl"]},
        {"network": network(), "hyper": {"reward_history": 8}},
        {"network": network(num_agents=2, channel_model="adhoc")},
        {"network": network(horizon=500)},
        {"network": network(num_bands=0)},
        {"network": network(jammer={"band": 3, "start_slot": 1, "end_slot": 10})},
        {"network": network(jammer={"band": 1, "start_slot": 1, "end_slot": 2000})},
        {"network": network(channel_model="adhoc", jammer={"band": 1, "start_slot": 1, "end_slot": 2})},
        {"network": network(), "hyper": {"epsilon0": 0.01, "epsilon_min": 0.02}},
    ],
)
def test_invalid_configs_are_rejected(data):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(data)


def test_jammer_window():
    assert JammerConfig(band=1, start_slot=5, end_slot=4).is_empty
    assert not JammerConfig(band=1, start_slot=5, end_slot=5).is_empty
    with pytest.raises(ValidationError):
        JammerConfig(band=1, start_slot=5, end_slot=3)


def test_with_overrides_revalidates():
    config = ExperimentConfig(network=NetworkConfig(**network()))
    assert config.with_overrides(seed=7).seed == 7
    with pytest.raises(ValidationError):
        config.with_overrides(metric_window=5000)


def test_catalog_schema_needs_its_table():
    with pytest.raises(AssertionError, match="no catalog table"):

        class Orphan(CatalogSchema):
            name: str

    assert catalog_columns()["Run"] == frozenset(RunSchema.model_fields)


def test_catalog_schema_must_match_table_columns():
    class Drift(CatalogTable):
        __tablename__ = "drift_check"

        id = Column(Integer, primary_key=True)
        seed = Column(Integer)

    try:
        with pytest.raises(AssertionError, match="missing fields: seed; fields without a column: jain"):

            class Drift(CatalogSchema):  # noqa: F811
                id: int
                jain: float
    finally:
        Base.metadata.remove(Base.metadata.tables["drift_check"])


def test_catalog_row_conversions():
    schema = RunSchema(
        scenario="single",
        num_agents=2,
        num_bands=2,
        channel_model="broadcast",
        agent_kinds="fsrl,fsrl",
        seed=1,
        horizon=100,
        output_dir="runs/x",
    )
    row = pydantic_to_sqlalchemy(schema, RunDB)
    assert row.id is None
    assert row.agent_kinds == "fsrl,fsrl"
    back = sqlalchemy_to_pydantic(row, RunSchema)
    assert back.scenario == "single" and back.jain is None
