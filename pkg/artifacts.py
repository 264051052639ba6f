"""
Artifact CLI commands.
"""

from pathlib import Path

import click

from experiments import fail
from services.artifact_service import PLOT_KINDS, ArtifactService


@click.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
def verify(run_dir):
    """Recompute a run's summary from its event log and re-check the medium."""
    report, error = ArtifactService.verify(run_dir)
    if error:
        fail(error)
    click.echo(f"✅ {report.run_dir} verified")
    click.echo(f"   {report.rows} event rows, {report.slots_checked} slots re-resolved")
    click.echo(f"   sigma={report.sigma:.6f}  C_bar={report.c_bar:.6f}  jain={report.jain:.6f}")


@click.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--kind", type=click.Choice(PLOT_KINDS), default="all", show_default=True, help="Table to emit")
@click.option("--svg", is_flag=True, help="Also render SVG charts")
@click.option("--slots", type=click.IntRange(min=1), default=None, help="Slots in the pattern table")
def plot(run_dir, kind, svg, slots):
    """Write plot tables for a run or grid directory under plot/."""
    written, error = ArtifactService.emit_plot_data(run_dir, kind, svg, slots)
    if error:
        fail(error)
    for path in written:
        click.echo(f"✅ {path}")
