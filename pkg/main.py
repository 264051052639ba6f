"""
Main CLI entry point.
"""

import logging
from pathlib import Path

import click
from dotenv import load_dotenv

# Load environment variables from .env file
env_path = Path(__file__).parent / ".env"
load_dotenv(dotenv_path=env_path)

from artifacts import plot, verify
from experiments import adhoc, compare, grid, jammer, single
from runs import runs
from services.base_service import get_log_level


@click.group()
@click.option("--log-level", default=None, help="Logging level (default: FAIRSHARE_LOG_LEVEL or INFO)")
def cli(log_level):
    """Fairshare CLI - multi-agent spectrum sharing experiments."""
    logging.basicConfig(
        level=(log_level or get_log_level()).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# Register commands
cli.add_command(single)
cli.add_command(grid)
cli.add_command(jammer)
cli.add_command(adhoc)
cli.add_command(compare)
cli.add_command(verify)
cli.add_command(plot)
cli.add_command(runs)


if __name__ == "__main__":
    cli()
