import csv
import json

import pytest

from lib.errors import CatalogError, ConfigError, VerificationError
from lib.simulation import metric_slots, simulate
from models.artifacts import EVENT_COLUMNS, GRID_COLUMNS
from models.config import ADHOC_HYPER_OVERRIDES, AgentKind
from services import experiment_service
from services.artifact_service import ArtifactService
from services.catalog_service import CatalogService
from services.experiment_service import (
    ExperimentService,
    adhoc_config,
    comparison_variant,
    jammer_config,
    reshape,
)


@pytest.fixture
def noisy_hyper(tiny_hyper):
    """Uniformly random actions so every agent transmits often."""
    return tiny_hyper.model_copy(update={"epsilon0": 1.0, "epsilon_decay": 0.0})


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


def write_rows(path, rows):
    with open(path, "w", newline="") as handle:
        csv.writer(handle, lineterminator="\n").writerows(rows)


def test_same_seed_gives_identical_event_logs(make_config):
    first = simulate(make_config(name="a", seed=3))
    second = simulate(make_config(name="b", seed=3))
    assert (first.run_dir / "events.csv").read_bytes() == (second.run_dir / "events.csv").read_bytes()
    assert first.summary.digests == second.summary.digests


def test_different_seeds_diverge(make_config):
    first = simulate(make_config(name="a", seed=3))
    second = simulate(make_config(name="b", seed=4))
    assert (first.run_dir / "events.csv").read_bytes() != (second.run_dir / "events.csv").read_bytes()


def test_run_directory_contents(make_config):
    artifacts = simulate(make_config(num_agents=3, num_bands=2, horizon=120))
    rows = read_rows(artifacts.run_dir / "events.csv")
    assert rows[0] == EVENT_COLUMNS
    assert len(rows) == 1 + 3 * 120
    assert [int(r[0]) for r in rows[1:4]] == [1, 1, 1]
    assert [int(r[1]) for r in rows[1:4]] == [1, 2, 3]

    metric_rows = read_rows(artifacts.run_dir / "metrics.csv")
    assert len(metric_rows) == 1 + 3 * len(metric_slots(120, 20))
    assert {int(r[0]) for r in metric_rows[1:]} == {40, 60, 80, 100, 120}

    band_rows = read_rows(artifacts.run_dir / "bands.csv")
    assert len(band_rows) == 1 + 2 * 5

    summary = json.loads((artifacts.run_dir / "summary.json").read_text())
    assert summary["C_bar"] == pytest.approx(artifacts.summary.c_bar)
    assert len(summary["finals"]) == 3
    config = json.loads((artifacts.run_dir / "config.json").read_text())
    assert config["network"]["num_agents"] == 3


def test_metric_slots_include_horizon():
    assert metric_slots(120, 20) == [40, 60, 80, 100, 120]
    assert metric_slots(130, 20) == [40, 60, 80, 100, 120, 130]
    assert metric_slots(30, 20) == [30]


def test_all_idle_agents_have_zero_throughput(make_config):
    artifacts = simulate(make_config(kind=AgentKind.IDLE))
    assert artifacts.summary.c_bar == 0.0
    assert artifacts.summary.jain == 1.0
    assert artifacts.summary.finals == [0.0, 0.0]


def test_unseeded_run_records_its_seed(make_config):
    artifacts = simulate(make_config(seeded=False))
    config = json.loads((artifacts.run_dir / "config.json").read_text())
    assert config["seeded"] is True
    assert config["seed"] == artifacts.summary.seed
    report, error = ArtifactService.verify(artifacts.run_dir)
    assert error is None


def test_checkpoints_written_on_request(make_config):
    artifacts = simulate(make_config(checkpoint=True))
    saved = sorted(p.name for p in (artifacts.run_dir / "checkpoints").iterdir())
    assert saved == ["agent_1.npz", "agent_2.npz"]


def test_verify_accepts_untouched_run(make_config):
    artifacts = simulate(make_config())
    report, error = ArtifactService.verify(artifacts.run_dir)
    assert error is None
    assert report.rows == 2 * 120
    assert report.slots_checked == 120
    assert report.jain == pytest.approx(artifacts.summary.jain, abs=1e-12)


def test_verify_locates_corrupted_outcome(make_config, noisy_hyper):
    artifacts = simulate(make_config(hyper=noisy_hyper))
    path = artifacts.run_dir / "events.csv"
    rows = read_rows(path)
    index = next(i for i in range(len(rows) // 2, len(rows)) if rows[i][2] != "0")
    rows[index][3] = "-1" if rows[index][3] == "1" else "1"
    write_rows(path, rows)

    report, error = ArtifactService.verify(artifacts.run_dir)
    assert report is None
    assert isinstance(error, VerificationError)
    assert error.exit_code == 4
    assert error.slot == int(rows[index][0])
    assert error.agent == int(rows[index][1])


def test_verify_rejects_truncated_log(make_config):
    artifacts = simulate(make_config())
    path = artifacts.run_dir / "events.csv"
    write_rows(path, read_rows(path)[:-1])
    _, error = ArtifactService.verify(artifacts.run_dir)
    assert isinstance(error, VerificationError)
    assert "rows" in str(error)


def test_verify_rejects_edited_summary(make_config):
    artifacts = simulate(make_config())
    path = artifacts.run_dir / "summary.json"
    summary = json.loads(path.read_text())
    summary["jain"] = summary["jain"] - 0.01
    path.write_text(json.dumps(summary))
    _, error = ArtifactService.verify(artifacts.run_dir)
    assert isinstance(error, VerificationError)
    assert "jain" in str(error)


def test_plot_tables_and_idempotence(make_config):
    artifacts = simulate(make_config(horizon=60))
    written, error = ArtifactService.emit_plot_data(artifacts.run_dir)
    assert error is None
    names = sorted(p.name for p in written)
    assert names == ["bands.csv", "pattern.csv", "throughput.csv"]

    plot_dir = artifacts.run_dir / "plot"
    assert read_rows(plot_dir / "throughput.csv")[0] == ["t", "agent_id", "C"]
    assert read_rows(plot_dir / "bands.csv")[0] == ["t", "band", "idle_rate"]
    pattern = read_rows(plot_dir / "pattern.csv")
    assert pattern[0] == ["t", "agent_id", "band", "outcome"]
    assert len(pattern) == 1 + 7 * 2
    assert pattern[1][0] == "54"

    before = {p.name: p.read_bytes() for p in written}
    ArtifactService.emit_plot_data(artifacts.run_dir)
    assert {p.name: p.read_bytes() for p in written} == before


def test_plot_svg_and_custom_pattern_length(make_config):
    artifacts = simulate(make_config(horizon=60))
    written, error = ArtifactService.emit_plot_data(artifacts.run_dir, "pattern", svg=True, slots=3)
    assert error is None
    assert sorted(p.name for p in written) == ["pattern.csv", "pattern.svg"]
    assert len(read_rows(artifacts.run_dir / "plot" / "pattern.csv")) == 1 + 3 * 2


def test_plot_grid_needs_grid_directory(make_config):
    artifacts = simulate(make_config(horizon=60))
    _, error = ArtifactService.emit_plot_data(artifacts.run_dir, "grid")
    assert error is not None


def test_run_single_records_catalog(make_config, out_root):
    artifacts, error = ExperimentService.run_single(make_config(), out_root)
    assert error is None
    runs, error = CatalogService.list_runs(out_root)
    assert error is None
    assert len(runs) == 1
    assert runs[0].status == "ok"
    assert runs[0].jain == pytest.approx(artifacts.summary.jain)
    assert runs[0].agent_kinds == "fsrl,fsrl"

    run, error = CatalogService.get_run(out_root, runs[0].id)
    assert run.output_dir == str(artifacts.run_dir)
    _, error = CatalogService.get_run(out_root, 999)
    assert isinstance(error, CatalogError)
    assert str(error) == "Run with ID 999 not found"


def test_unreadable_catalog_is_reported_not_raised(make_config, out_root):
    out_root.mkdir(parents=True)
    (out_root / "catalog.db").write_bytes(b"this is not a database file" * 64)

    runs, error = CatalogService.list_runs(out_root)
    assert runs is None
    assert isinstance(error, CatalogError)
    assert "catalog.db" in str(error)
    assert isinstance(CatalogService.get_run(out_root, 1)[1], CatalogError)

    artifacts, error = ExperimentService.run_single(make_config(), out_root)
    assert error is None
    assert (artifacts.run_dir / "summary.json").exists()


def test_single_cell_grid_matches_single_run(make_config, out_root, tmp_path):
    base = make_config(name="single")
    simulate(base)
    rows, error = ExperimentService.run_grid([2], [2], base, tmp_path / "grid", out_root)
    assert error is None
    assert len(rows) == 1
    cell = tmp_path / "grid" / "M2_N2"
    assert (cell / "events.csv").read_bytes() == (tmp_path / "single" / "events.csv").read_bytes()
    assert rows[0].jain == pytest.approx(json.loads((cell / "summary.json").read_text())["jain"])


def test_grid_only_runs_cells_with_more_agents_than_bands(make_config, out_root, tmp_path):
    rows, error = ExperimentService.run_grid([1, 2], [1, 2], make_config(horizon=60), tmp_path / "grid", out_root)
    assert error is None
    assert [(r.num_agents, r.num_bands) for r in rows] == [(1, 1), (2, 1), (2, 2)]
    table = read_rows(tmp_path / "grid" / "grid.csv")
    assert table[0] == GRID_COLUMNS
    assert len(table) == 4

    written, error = ArtifactService.emit_plot_data(tmp_path / "grid", "grid", svg=True)
    assert error is None
    assert sorted(p.name for p in written) == ["grid.csv", "grid_c_bar.svg", "grid_jain.svg"]


def test_full_grid_keeps_failed_cells(make_config, out_root, tmp_path, monkeypatch):
    monkeypatch.setattr(
        experiment_service, "_run_many", lambda configs, workers: [(None, "boom")] * len(configs)
    )
    rows, error = ExperimentService.run_grid(
        range(2, 11), range(1, 11), make_config(), tmp_path / "grid", out_root
    )
    assert error is None
    assert len(rows) == 54
    assert all(row.error == "boom" and row.jain is None for row in rows)
    table = read_rows(tmp_path / "grid" / "grid.csv")
    assert table[1] == ["2", "1", "", "", ""]
    runs, _ = CatalogService.list_runs(out_root, limit=100)
    assert len(runs) == 54
    assert {run.status for run in runs} == {"failed"}


def test_grid_without_valid_cells_is_a_config_error(make_config, out_root, tmp_path):
    _, error = ExperimentService.run_grid([2], [3, 4], make_config(), tmp_path / "grid", out_root)
    assert isinstance(error, ConfigError)


def test_jammer_run_reports_segments(make_config, out_root, noisy_hyper):
    config = make_config(
        hyper=noisy_hyper,
        network={"jammer": {"band": 1, "start_slot": 41, "end_slot": 80}},
    )
    artifacts, error = ExperimentService.run_jammer(config, out_root)
    assert error is None
    report = artifacts.summary.jammer
    assert [s.agent_id for s in report.segments] == [1, 2]
    for segment in report.segments:
        assert segment.at_start is not None
        assert segment.at_end is not None
        assert segment.before is not None and segment.during is not None and segment.after is not None

    for t, agent, action, outcome, *_ in read_rows(artifacts.run_dir / "events.csv")[1:]:
        if 41 <= int(t) <= 80 and action == "1":
            assert outcome == "-1"
    assert ArtifactService.verify(artifacts.run_dir)[1] is None


def test_empty_jammer_window_matches_plain_run(make_config, out_root, noisy_hyper):
    plain, error = ExperimentService.run_single(make_config(name="plain", hyper=noisy_hyper, seed=5), out_root)
    assert error is None
    jammed, error = ExperimentService.run_jammer(
        make_config(
            name="jam",
            hyper=noisy_hyper,
            seed=5,
            network={"jammer": {"band": 1, "start_slot": 41, "end_slot": 40}},
        ),
        out_root,
    )
    assert error is None
    assert jammed.summary.digests == plain.summary.digests
    assert (jammed.run_dir / "events.csv").read_bytes() == (plain.run_dir / "events.csv").read_bytes()
    assert all(segment.during is None for segment in jammed.summary.jammer.segments)


def test_jammer_run_needs_a_jammer(make_config, out_root):
    _, error = ExperimentService.run_jammer(make_config(), out_root)
    assert isinstance(error, ConfigError)


def test_resizing_mixed_agent_kinds_is_a_config_error(make_config, out_root, tmp_path):
    mixed = make_config().with_overrides(agent_kinds=[AgentKind.FSRL, AgentKind.DQN_CP1])
    with pytest.raises(ConfigError, match="mixed agent kinds"):
        reshape(mixed, 3, 2)
    with pytest.raises(ConfigError):
        jammer_config("a", mixed)
    with pytest.raises(ConfigError):
        adhoc_config(mixed)

    _, error = ExperimentService.run_grid([2], [1], mixed, tmp_path / "grid", out_root)
    assert isinstance(error, ConfigError)

    same = reshape(make_config(kind=AgentKind.DQN_CP1), 3, 2)
    assert same.agent_kinds == [AgentKind.DQN_CP1] * 3


def test_jammer_presets(make_config):
    config = jammer_config("b", make_config())
    assert (config.network.num_agents, config.network.num_bands) == (6, 6)
    assert config.network.jammer.band == 6
    assert (config.network.jammer.start_slot, config.network.jammer.end_slot) == (90_000, 140_000)
    assert config.hyper.epsilon_min == 0.01
    with pytest.raises(ConfigError):
        jammer_config("c", make_config())


def test_adhoc_run_reports_pattern(make_config, out_root):
    config = make_config(num_agents=3, horizon=60, network={"channel_model": "adhoc"})
    artifacts, error = ExperimentService.run_adhoc(config, out_root)
    assert error is None
    pattern = artifacts.summary.pattern
    assert [slot.t for slot in pattern] == list(range(54, 61))
    assert all(len(slot.actions) == 3 for slot in pattern)
    assert ArtifactService.verify(artifacts.run_dir)[1] is None


def test_adhoc_preset_and_guards(make_config, out_root):
    config = adhoc_config(make_config(), horizon=200)
    assert config.network.num_agents == 6
    assert config.hyper.epsilon0 == ADHOC_HYPER_OVERRIDES["epsilon0"]
    _, error = ExperimentService.run_adhoc(make_config(), out_root)
    assert isinstance(error, ConfigError)


def test_comparison_variants(make_config):
    base = make_config(num_agents=3)
    assert comparison_variant(base, "cp1").agent_kinds == [AgentKind.DQN_CP1] * 3
    assert comparison_variant(base, "fsrl-no-time-ref").time_reference is False
    assert comparison_variant(base, "fsrl").time_reference is True
    with pytest.raises(ConfigError):
        comparison_variant(base, "other")


def test_comparison_writes_one_row_per_variant(make_config, out_root, tmp_path):
    rows, error = ExperimentService.run_comparison([(2, 2)], make_config(horizon=60), tmp_path / "cmp", out_root)
    assert error is None
    assert [r.variant for r in rows] == ["cp1", "fsrl-no-time-ref", "fsrl"]
    table = read_rows(tmp_path / "cmp" / "comparison.csv")
    assert table[0] == ["M", "N", "variant", "jain", "C_bar"]
    assert [r[2] for r in table[1:]] == ["cp1", "fsrl-no-time-ref", "fsrl"]
    assert (tmp_path / "cmp" / "M2_N2" / "cp1" / "summary.json").exists()
