"""
Run catalog CLI commands.
"""

import click

from services.base_service import get_out_root
from services.catalog_service import CatalogService


def _fmt(value):
    return "-" if value is None else f"{value:.3f}"


@click.group()
def runs():
    """Browse the catalog of finished runs."""
    pass


@runs.command(name="list")
@click.option("--scenario", "-s", default=None, help="Only runs of this scenario")
@click.option("--limit", "-l", default=50, type=int, help="Maximum runs to show (default: 50)")
def list_runs(scenario, limit):
    """List recorded runs, newest first."""
    entries, error = CatalogService.list_runs(get_out_root(), scenario, limit)
    if error:
        click.echo(f"❌ {error}", err=True)
        return
    if not entries:
        click.echo("No runs recorded.")
        return

    click.echo(f"\n{'ID':<5} {'Scenario':<8} {'Label':<18} {'M':>3} {'N':>3} {'Seed':>10} {'C_bar':>6} {'Jain':>6}")
    click.echo("-" * 66)
    for run in entries:
        status = "" if run.status == "ok" else " ❌"
        click.echo(
            f"{run.id:<5} {run.scenario:<8} {run.label[:18]:<18} {run.num_agents:>3} {run.num_bands:>3} "
            f"{run.seed:>10} {_fmt(run.c_bar):>6} {_fmt(run.jain):>6}{status}"
        )
    click.echo()


@runs.command()
@click.argument("run_id", type=int)
def show(run_id):
    """Show every catalog field of one run."""
    run, error = CatalogService.get_run(get_out_root(), run_id)
    if error:
        click.echo(f"❌ {error}", err=True)
        return

    click.echo(f"\n{'=' * 60}")
    click.echo(f"Run #{run.id} ({run.scenario}{', ' + run.label if run.label else ''})")
    click.echo(f"{'=' * 60}")
    click.echo(f"Setting:    M={run.num_agents} N={run.num_bands} {run.channel_model}")
    click.echo(f"Agents:     {run.agent_kinds}")
    click.echo(f"Seed:       {run.seed}")
    click.echo(f"Horizon:    {run.horizon}")
    click.echo(f"sigma:      {_fmt(run.sigma)}")
    click.echo(f"C_bar:      {_fmt(run.c_bar)}")
    click.echo(f"Jain:       {_fmt(run.jain)}")
    click.echo(f"Sum C_m:    {_fmt(run.throughput_sum)}")
    click.echo(f"Output:     {run.output_dir}")
    click.echo(f"Status:     {run.status}")
    if run.error:
        click.echo(f"Error:      {run.error}")
    click.echo(f"Recorded:   {run.created_at.strftime('%Y-%m-%d %H:%M:%S')}")
    click.echo()
