import json

import pytest
from click.testing import CliRunner

from experiments import build_config, parse_range, parse_setting
from lib.errors import ConfigError
from main import cli


@pytest.fixture
def config_file(tmp_path, tiny_hyper):
    path = tmp_path / "tiny.json"
    path.write_text(
        json.dumps(
            {
                "network": {"num_agents": 2, "num_bands": 2, "horizon": 60},
                "hyper": tiny_hyper.model_dump(),
                "metric_window": 20,
            }
        )
    )
    return path


def invoke(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


def test_parse_range():
    assert parse_range("2-5") == [2, 3, 4, 5]
    assert parse_range("1,3") == [1, 3]


def test_parse_setting():
    assert parse_setting("10,9") == (10, 9)


def test_build_config_flags_override_file(config_file, out_root):
    config = build_config(config_file, "single", num_agents=3, seed=9, agents="cp1", no_band_sharing=True)
    assert config.network.num_agents == 3
    assert config.network.horizon == 60
    assert config.seed == 9
    assert [k.value for k in config.agent_kinds] == ["cp1"] * 3
    assert config.rewards.band_sharing is False
    assert config.output_dir == out_root / "single" / "M3_N2_seed9"


def test_build_config_rejects_invalid_values(config_file):
    with pytest.raises(ConfigError):
        build_config(config_file, "single", horizon=10)


def test_single_then_verify_and_catalog(config_file, out_root, tmp_path):
    run_dir = tmp_path / "cli_run"
    result = invoke("single", "--config", config_file, "--out", run_dir, "--seed", 2)
    assert result.exit_code == 0, result.output
    assert "✅" in result.output
    assert (run_dir / "summary.json").exists()

    result = invoke("verify", run_dir)
    assert result.exit_code == 0, result.output
    assert "verified" in result.output

    result = invoke("plot", run_dir, "--kind", "throughput")
    assert result.exit_code == 0, result.output
    assert (run_dir / "plot" / "throughput.csv").exists()

    result = invoke("runs", "list")
    assert result.exit_code == 0
    assert "single" in result.output
    result = invoke("runs", "show", 1)
    assert result.exit_code == 0
    assert str(run_dir) in result.output


def test_invalid_config_exits_with_code_two(config_file, out_root, tmp_path):
    result = invoke("single", "--config", config_file, "--horizon", 10, "--out", tmp_path / "bad")
    assert result.exit_code == 2
    assert "❌" in result.output


def test_adhoc_needs_three_agents():
    result = invoke("adhoc", "-M", 2)
    assert result.exit_code == 2


def test_corrupted_run_fails_verification_with_code_four(config_file, out_root, tmp_path):
    run_dir = tmp_path / "cli_run"
    assert invoke("single", "--config", config_file, "--out", run_dir).exit_code == 0
    events = run_dir / "events.csv"
    events.write_text("".join(events.read_text().splitlines(keepends=True)[:-5]))
    result = invoke("verify", run_dir)
    assert result.exit_code == 4
    assert "rows" in result.output


def test_runs_show_missing_id(out_root):
    result = invoke("runs", "show", 42)
    assert "Run with ID 42 not found" in result.output
