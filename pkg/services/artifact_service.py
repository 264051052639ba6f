"""
Artifact service layer - audits finished runs and emits plot tables.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from lib import charts
from lib.agents import chain_digest
from lib.env import Medium, SlotRecord
from lib.errors import ArtifactIOError, FairshareError, VerificationError
from lib.metrics import summarize
from lib.simulation import final_throughputs
from models.artifacts import (
    BANDS_FILE,
    CONFIG_FILE,
    EVENT_COLUMNS,
    EVENTS_FILE,
    GRID_COLUMNS,
    GRID_FILE,
    METRICS_FILE,
    PLOT_DIR,
    SUMMARY_FILE,
    RunSummary,
    VerificationReport,
)
from models.config import ExperimentConfig
from services.base_service import guarded

logger = logging.getLogger(__name__)

ENV_SAMPLE_SLOTS = 1000
TOLERANCE = 1e-12
PLOT_KINDS = ("throughput", "bands", "pattern", "grid", "all")


@dataclass
class EventTable:
    """Actions and outcomes parsed from an event log, row k-1 holding slot k."""

    actions: np.ndarray
    outcomes: np.ndarray


def _read_csv(path: Path) -> Tuple[List[str], List[List[str]]]:
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, [])
            return header, list(reader)
    except OSError as e:
        raise ArtifactIOError(path, f"cannot read: {e}") from e


def _write_csv(path: Path, header: List[str], rows: List[List]) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write: {e}") from e
    return path


def read_run(run_dir: Path) -> Tuple[ExperimentConfig, RunSummary]:
    """Config snapshot and summary of a finished run."""
    run_dir = Path(run_dir)
    try:
        config = ExperimentConfig.model_validate_json((run_dir / CONFIG_FILE).read_text())
        summary = RunSummary.model_validate_json((run_dir / SUMMARY_FILE).read_text())
    except OSError as e:
        raise ArtifactIOError(run_dir, f"incomplete run directory: {e}") from e
    except ValidationError as e:
        raise VerificationError(f"Unreadable config or summary in {run_dir}: {e}") from e
    return config, summary


def read_events(path: Path, num_agents: int, horizon: int) -> EventTable:
    """
    Parse an event log, checking completeness and row order.

    Raises VerificationError naming the first offending slot and agent.
    """
    header, rows = _read_csv(path)
    if header != EVENT_COLUMNS:
        raise VerificationError(f"Unexpected event log header {header}")
    expected = num_agents * horizon
    if len(rows) != expected:
        raise VerificationError(f"Event log has {len(rows)} rows, expected {expected}")

    actions = np.zeros((horizon, num_agents), dtype=np.int16)
    outcomes = np.zeros((horizon, num_agents), dtype=np.int8)
    for i, row in enumerate(rows):
        slot, agent = i // num_agents + 1, i % num_agents + 1
        try:
            t, m, action, outcome = (int(value) for value in row[:4])
            SlotRecord(t, action, outcome)
        except ValueError as e:
            raise VerificationError(f"Malformed event row: {e}", slot=slot, agent=agent) from e
        if (t, m) != (slot, agent):
            raise VerificationError(f"Event row out of order, found t={t} agent={m}", slot=slot, agent=agent)
        actions[t - 1, m - 1] = action
        outcomes[t - 1, m - 1] = outcome
    return EventTable(actions=actions, outcomes=outcomes)


def _check_slot(medium: Medium, table: EventTable, t: int) -> None:
    expected = medium.resolve(t, [int(a) for a in table.actions[t - 1]])
    for m, (want, got) in enumerate(zip(expected, table.outcomes[t - 1])):
        if want != got:
            raise VerificationError(
                f"Logged outcome {int(got)} but the medium gives {want}", slot=t, agent=m + 1
            )


def _check_digests(medium: Medium, table: EventTable, digests: List[str]) -> None:
    """Recompute each agent's input digest; on mismatch, locate the first bad slot."""
    horizon, num_agents = table.actions.shape
    if len(digests) != num_agents:
        raise VerificationError(f"Summary has {len(digests)} digests for {num_agents} agents")
    for m in range(num_agents):
        digest = ""
        for t in range(1, horizon + 1):
            digest = chain_digest(digest, SlotRecord(t, int(table.actions[t - 1, m]), int(table.outcomes[t - 1, m])))
        if digest != digests[m]:
            for t in range(1, horizon + 1):
                _check_slot(medium, table, t)
            raise VerificationError("Event log disagrees with the agent's input digest", agent=m + 1)


def _check_close(name: str, stored: float, recomputed: float, agent: Optional[int] = None) -> None:
    if abs(stored - recomputed) > TOLERANCE:
        raise VerificationError(
            f"{name} mismatch: summary has {stored!r}, event log gives {recomputed!r}", agent=agent
        )


def verify_run(run_dir: Path) -> VerificationReport:
    """
    Audit a run directory against its own event log.

    Re-resolves up to 1000 random slots through the medium, replays every
    agent's input digest and recomputes sigma, C_bar and the Jain index.
    """
    run_dir = Path(run_dir)
    config, summary = read_run(run_dir)
    network = config.network
    if (summary.num_agents, summary.num_bands, summary.horizon) != (
        network.num_agents,
        network.num_bands,
        network.horizon,
    ):
        raise VerificationError("Summary shape does not match the config snapshot")

    table = read_events(run_dir / EVENTS_FILE, network.num_agents, network.horizon)
    medium = Medium(network)
    rng = np.random.default_rng(config.seed)
    count = min(ENV_SAMPLE_SLOTS, network.horizon)
    slots = np.sort(rng.choice(np.arange(1, network.horizon + 1), size=count, replace=False))
    for t in slots:
        _check_slot(medium, table, int(t))

    _check_digests(medium, table, summary.digests)

    finals = final_throughputs(table.outcomes, config.metric_window)
    if len(finals) != len(summary.finals):
        raise VerificationError("Summary lists the wrong number of final throughputs")
    for m, (stored, recomputed) in enumerate(zip(summary.finals, finals)):
        _check_close("Final throughput", stored, recomputed, agent=m + 1)
    totals = summarize(finals, network.num_bands)
    _check_close("sigma", summary.sigma, totals.sigma)
    _check_close("C_bar", summary.c_bar, totals.c_bar)
    _check_close("jain", summary.jain, totals.jain)

    logger.info("Verified %s: %d rows, %d slots re-resolved", run_dir, table.actions.size, count)
    return VerificationReport(
        run_dir=run_dir,
        rows=int(table.actions.size),
        slots_checked=count,
        sigma=totals.sigma,
        c_bar=totals.c_bar,
        jain=totals.jain,
    )


# ========== plot tables ==========


def _throughput_table(run_dir: Path, plot_dir: Path, svg: bool) -> List[Path]:
    header, rows = _read_csv(run_dir / METRICS_FILE)
    table = [[row[0], row[1], row[2]] for row in rows]
    written = [_write_csv(plot_dir / "throughput.csv", ["t", "agent_id", "C"], table)]
    if svg:
        series = {}
        for t, agent, value in table:
            xs, ys = series.setdefault(f"agent {agent}", ([], []))
            xs.append(int(t))
            ys.append(float(value))
        written.append(charts.line_chart(series, plot_dir / "throughput.svg", "slot", "C"))
    return written


def _bands_table(run_dir: Path, plot_dir: Path, svg: bool) -> List[Path]:
    header, rows = _read_csv(run_dir / BANDS_FILE)
    written = [_write_csv(plot_dir / "bands.csv", header, rows)]
    if svg:
        series = {}
        for t, band, value in rows:
            xs, ys = series.setdefault(f"band {band}", ([], []))
            xs.append(int(t))
            ys.append(float(value))
        written.append(charts.line_chart(series, plot_dir / "bands.svg", "slot", "idle rate"))
    return written


def _pattern_table(run_dir: Path, plot_dir: Path, svg: bool, slots: Optional[int]) -> List[Path]:
    config, _ = read_run(run_dir)
    network = config.network
    table = read_events(run_dir / EVENTS_FILE, network.num_agents, network.horizon)
    k = slots or config.pattern_slots
    first = max(1, network.horizon - k + 1)
    rows = [
        [t, m + 1, int(table.actions[t - 1, m]), int(table.outcomes[t - 1, m])]
        for t in range(first, network.horizon + 1)
        for m in range(network.num_agents)
    ]
    written = [_write_csv(plot_dir / "pattern.csv", ["t", "agent_id", "band", "outcome"], rows)]
    if svg:
        window = list(range(first, network.horizon + 1))
        bands = table.actions[first - 1 : network.horizon].T.astype(int)
        written.append(charts.pattern_raster(window, bands, plot_dir / "pattern.svg"))
    return written


def _grid_table(run_dir: Path, plot_dir: Path, svg: bool) -> List[Path]:
    header, rows = _read_csv(run_dir / GRID_FILE)
    if header != GRID_COLUMNS:
        raise ArtifactIOError(run_dir / GRID_FILE, f"unexpected header {header}")
    written = [_write_csv(plot_dir / "grid.csv", GRID_COLUMNS, rows)]
    if svg:
        values = {(int(r[0]), int(r[1])): float(r[4]) for r in rows if r[4] != ""}
        written.append(charts.heat_map(values, plot_dir / "grid_jain.svg", "Jain index"))
        values = {(int(r[0]), int(r[1])): float(r[2]) for r in rows if r[2] != ""}
        written.append(charts.heat_map(values, plot_dir / "grid_c_bar.svg", "C_bar"))
    return written


def emit_plot_data(
    run_dir: Path, kind: str = "all", svg: bool = False, slots: Optional[int] = None
) -> List[Path]:
    """
    Write delimited plot tables (and optionally SVG charts) under `<run_dir>/plot/`.

    Args:
        run_dir: A run directory, or a grid directory holding grid.csv.
        kind: throughput, bands, pattern, grid or all.
        svg: Also render charts.
        slots: Pattern length; defaults to the run's pattern_slots.

    Returns:
        Paths written. Re-emitting overwrites them with identical content.
    """
    run_dir = Path(run_dir)
    if kind not in PLOT_KINDS:
        raise ArtifactIOError(run_dir, f"unknown plot kind '{kind}'")
    plot_dir = run_dir / PLOT_DIR
    is_grid = (run_dir / GRID_FILE).exists()
    is_run = (run_dir / SUMMARY_FILE).exists()
    if kind == "grid" and not is_grid:
        raise ArtifactIOError(run_dir / GRID_FILE, "not a grid directory")
    if kind in ("throughput", "bands", "pattern") and not is_run:
        raise ArtifactIOError(run_dir / SUMMARY_FILE, "run is not complete")
    if kind == "all" and not (is_grid or is_run):
        raise ArtifactIOError(run_dir, "neither a finished run nor a grid directory")

    written = []
    if kind in ("throughput", "all") and is_run:
        written += _throughput_table(run_dir, plot_dir, svg)
    if kind in ("bands", "all") and is_run:
        written += _bands_table(run_dir, plot_dir, svg)
    if kind in ("pattern", "all") and is_run:
        written += _pattern_table(run_dir, plot_dir, svg, slots)
    if kind in ("grid", "all") and is_grid:
        written += _grid_table(run_dir, plot_dir, svg)
    logger.info("Wrote %d plot files to %s", len(written), plot_dir)
    return written


class ArtifactService:
    """Service for run artifacts."""

    @staticmethod
    def verify(run_dir: Path) -> Tuple[Optional[VerificationReport], Optional[FairshareError]]:
        """
        Audit a run directory.

        Returns:
            Tuple of (report, error). A VerificationError names the slot and agent.
        """
        return guarded(lambda: verify_run(run_dir))

    @staticmethod
    def emit_plot_data(
        run_dir: Path, kind: str = "all", svg: bool = False, slots: Optional[int] = None
    ) -> Tuple[Optional[List[Path]], Optional[FairshareError]]:
        return guarded(lambda: emit_plot_data(run_dir, kind, svg, slots))


__all__ = ["ArtifactService", "EventTable", "read_run", "read_events", "verify_run", "emit_plot_data"]
