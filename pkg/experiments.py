"""
Experiment CLI commands.
"""

import json
from pathlib import Path
from typing import List, NoReturn, Optional, Tuple

import click
from pydantic import ValidationError

from lib.errors import ConfigError, FairshareError
from models.artifacts import RunArtifacts
from models.config import JAMMER_HYPER_OVERRIDES, AgentKind, ExperimentConfig
from services.base_service import get_out_root, get_workers
from services.experiment_service import (
    ADHOC_HORIZON,
    COMPARISON_SETTINGS,
    JAMMER_HORIZON,
    JAMMER_PRESETS,
    ExperimentService,
    adhoc_config,
    jammer_config,
    with_hyper,
)

GRID_HORIZON = 50_000


def fail(error: FairshareError) -> NoReturn:
    """Print an error and exit with its code."""
    click.echo(f"❌ {error}", err=True)
    raise SystemExit(error.exit_code)


def parse_range(text: str) -> List[int]:
    """'2-10' or '2,4,6' to a list of ints."""
    try:
        if "-" in text:
            low, high = (int(part) for part in text.split("-", 1))
            return list(range(low, high + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"'{text}' is not a range like 2-10 or a list like 2,4,6")


def parse_setting(text: str) -> Tuple[int, int]:
    try:
        m, n = (int(part) for part in text.split(","))
    except ValueError:
        raise click.BadParameter(f"'{text}' is not a setting like 10,9")
    return m, n


def build_config(
    config_path: Optional[Path],
    scenario: str,
    num_agents: Optional[int] = None,
    num_bands: Optional[int] = None,
    horizon: Optional[int] = None,
    seed: Optional[int] = None,
    out: Optional[Path] = None,
    agents: Optional[str] = None,
    no_time_ref: bool = False,
    no_band_sharing: bool = False,
    unseeded: bool = False,
    checkpoint: bool = False,
    default_horizon: Optional[int] = None,
    default_agents: int = 2,
    default_bands: int = 2,
) -> ExperimentConfig:
    """
    Merge a JSON config file with command-line flags.

    Flags override file values, which override model defaults.
    """
    data = {}
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"{config_path}: {e}") from e

    network = dict(data.get("network", {}))
    network.setdefault("num_agents", default_agents)
    network.setdefault("num_bands", default_bands)
    if default_horizon is not None:
        network.setdefault("horizon", default_horizon)
    if num_agents is not None:
        network["num_agents"] = num_agents
    if num_bands is not None:
        network["num_bands"] = num_bands
    if horizon is not None:
        network["horizon"] = horizon
    data["network"] = network
    data["scenario"] = scenario

    if agents is not None or (
        "agent_kinds" in data and len(data["agent_kinds"]) != network["num_agents"]
    ):
        kind = agents or data["agent_kinds"][0]
        data["agent_kinds"] = [kind] * network["num_agents"]
    if seed is not None:
        data["seed"] = seed
    if unseeded:
        data["seeded"] = False
    if no_time_ref:
        data["time_reference"] = False
    if no_band_sharing:
        data["rewards"] = {**data.get("rewards", {}), "band_sharing": False}
    if checkpoint:
        data["checkpoint"] = True

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e

    if out is not None:
        run_dir = Path(out)
    elif "output_dir" in data:
        run_dir = config.output_dir
    else:
        tag = "unseeded" if not config.seeded else f"seed{config.seed}"
        run_dir = get_out_root() / scenario / f"M{network['num_agents']}_N{network['num_bands']}_{tag}"
    return config.with_overrides(output_dir=run_dir)


def common_options(func):
    """Flags shared by every experiment command."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="JSON config file"),
        click.option("--seed", type=click.IntRange(min=0), default=None, help="Run seed"),
        click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory"),
        click.option("--agents", type=click.Choice([AgentKind.FSRL.value, AgentKind.DQN_CP1.value]), default=None, help="Policy for every source"),
        click.option("--no-time-ref", is_flag=True, help="Drop the time-bit columns from the state"),
        click.option("--no-band-sharing", is_flag=True, help="Drop the band-sharing reward term"),
        click.option("--horizon", type=click.IntRange(min=1), default=None, help="Slots to simulate"),
        click.option("--unseeded", is_flag=True, help="Draw the seed from OS entropy (recorded)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _report(artifacts: RunArtifacts):
    summary = artifacts.summary
    click.echo(f"✅ Run written to {artifacts.run_dir}")
    click.echo(f"   seed={summary.seed}  sigma={summary.sigma:.4f}  C_bar={summary.c_bar:.4f}  jain={summary.jain:.4f}")
    click.echo(f"   final throughputs: {' '.join(f'{c:.3f}' for c in summary.finals)}")
    if summary.jammer is not None:
        click.echo(f"   recovered after jammer: {'yes' if summary.jammer.recovered else 'no'}")
        for segment in summary.jammer.segments:
            parts = [
                f"{name}={value:.3f}"
                for name, value in (("before", segment.before), ("during", segment.during), ("after", segment.after))
                if value is not None
            ]
            click.echo(f"   agent {segment.agent_id}: {' '.join(parts)}")
    if summary.pattern is not None:
        click.echo(f"   sum of throughputs: {summary.throughput_sum:.3f}")
        for slot in summary.pattern:
            click.echo(f"   t={slot.t:<8} " + " ".join(str(a) for a in slot.actions))


@click.command()
@common_options
@click.option("--num-agents", "-M", type=click.IntRange(min=1), default=None, help="Number of sources (default: 2)")
@click.option("--num-bands", "-N", type=click.IntRange(min=1), default=None, help="Number of bands (default: 2)")
@click.option("--checkpoint", is_flag=True, help="Save agent checkpoints at the end")
def single(config_path, seed, out, agents, no_time_ref, no_band_sharing, horizon, unseeded, num_agents, num_bands, checkpoint):
    """Run one experiment."""
    try:
        config = build_config(
            config_path, "single", num_agents, num_bands, horizon, seed, out, agents,
            no_time_ref, no_band_sharing, unseeded, checkpoint,
        )
    except ConfigError as e:
        fail(e)
    artifacts, error = ExperimentService.run_single(config, get_out_root())
    if error:
        fail(error)
    _report(artifacts)


@click.command()
@common_options
@click.option("--agents-range", default="2-10", show_default=True, help="Values of M, e.g. 2-10 or 2,4")
@click.option("--bands-range", default="1-10", show_default=True, help="Values of N, e.g. 1-10 or 1,2")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel worker processes")
def grid(config_path, seed, out, agents, no_time_ref, no_band_sharing, horizon, unseeded, agents_range, bands_range, workers):
    """Run every (M, N) cell with M >= N using the same hyper-parameters."""
    agent_counts = parse_range(agents_range)
    band_counts = parse_range(bands_range)
    out_dir = out or get_out_root() / "grid"
    try:
        base = build_config(
            config_path, "grid", None, None, horizon, seed, out_dir, agents,
            no_time_ref, no_band_sharing, unseeded, default_horizon=GRID_HORIZON,
        )
    except ConfigError as e:
        fail(e)
    rows, error = ExperimentService.run_grid(
        agent_counts, band_counts, base, out_dir, get_out_root(), workers or get_workers()
    )
    if error:
        fail(error)

    click.echo(f"\n{'M':>3} {'N':>3} {'C_bar':>7} {'sigma':>7} {'jain':>7}")
    for row in rows:
        if row.error:
            click.echo(f"{row.num_agents:>3} {row.num_bands:>3}  ❌ {row.error}")
        else:
            click.echo(f"{row.num_agents:>3} {row.num_bands:>3} {row.c_bar:>7.3f} {row.sigma:>7.3f} {row.jain:>7.3f}")
    failed = sum(1 for row in rows if row.error)
    click.echo(f"\n✅ {len(rows) - failed}/{len(rows)} cells written to {out_dir}")


@click.command()
@common_options
@click.option("--preset", type=click.Choice(sorted(JAMMER_PRESETS)), default=None, help="Published jammer scenario (default: a)")
def jammer(config_path, seed, out, agents, no_time_ref, no_band_sharing, horizon, unseeded, preset):
    """Run a scenario in which a jammer occupies one band for a while."""
    try:
        base = build_config(
            config_path, "jammer", None, None, horizon, seed, out, agents,
            no_time_ref, no_band_sharing, unseeded, default_horizon=JAMMER_HORIZON,
        )
        if preset is None and base.network.jammer is not None:
            config = with_hyper(base, JAMMER_HYPER_OVERRIDES)
        else:
            config = jammer_config(preset or "a", base, horizon or JAMMER_HORIZON)
            if out is None:
                config = config.with_overrides(output_dir=get_out_root() / "jammer" / f"{preset or 'a'}_seed{config.seed}")
    except ConfigError as e:
        fail(e)
    artifacts, error = ExperimentService.run_jammer(config, get_out_root())
    if error:
        fail(error)
    _report(artifacts)


@click.command()
@common_options
@click.option("--num-agents", "-M", type=click.IntRange(min=3), default=None, help="Agents on the chain (default: 6)")
@click.option("--num-bands", "-N", type=click.IntRange(min=1), default=None, help="Number of bands (default: 2)")
def adhoc(config_path, seed, out, agents, no_time_ref, no_band_sharing, horizon, unseeded, num_agents, num_bands):
    """Run the ad-hoc chain where only neighbours interfere."""
    try:
        base = build_config(
            config_path, "adhoc", num_agents, num_bands, horizon, seed, out, agents,
            no_time_ref, no_band_sharing, unseeded,
            default_horizon=ADHOC_HORIZON, default_agents=6, default_bands=2,
        )
        config = adhoc_config(
            base, base.network.num_agents, base.network.num_bands, base.network.horizon
        )
    except ConfigError as e:
        fail(e)
    artifacts, error = ExperimentService.run_adhoc(config, get_out_root())
    if error:
        fail(error)
    _report(artifacts)


@click.command()
@common_options
@click.option("--setting", "settings", multiple=True, help="M,N pair (repeatable; default: the twelve published pairs)")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel worker processes")
def compare(config_path, seed, out, agents, no_time_ref, no_band_sharing, horizon, unseeded, settings, workers):
    """Compare DQN-CP1, FSRL without time reference and FSRL on the same settings."""
    pairs = [parse_setting(s) for s in settings] or COMPARISON_SETTINGS
    out_dir = out or get_out_root() / "compare"
    try:
        base = build_config(
            config_path, "compare", None, None, horizon, seed, out_dir, agents,
            no_time_ref, no_band_sharing, unseeded, default_horizon=GRID_HORIZON,
        )
    except ConfigError as e:
        fail(e)
    rows, error = ExperimentService.run_comparison(
        pairs, base, out_dir, get_out_root(), workers or get_workers()
    )
    if error:
        fail(error)

    click.echo(f"\n{'M':>3} {'N':>3} {'variant':<18} {'jain':>6} {'C_bar':>6}")
    for row in rows:
        if row.error:
            click.echo(f"{row.num_agents:>3} {row.num_bands:>3} {row.variant:<18} ❌ {row.error}")
        else:
            click.echo(f"{row.num_agents:>3} {row.num_bands:>3} {row.variant:<18} {row.jain:>6.2f} {row.c_bar:>6.2f}")
    click.echo(f"\n✅ Comparison written to {out_dir}")
