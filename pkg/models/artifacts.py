"""
Records written to and read back from a run directory.
"""

from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

CONFIG_FILE = "config.json"
EVENTS_FILE = "events.csv"
METRICS_FILE = "metrics.csv"
BANDS_FILE = "bands.csv"
SUMMARY_FILE = "summary.json"
CHECKPOINT_DIR = "checkpoints"
PLOT_DIR = "plot"
GRID_FILE = "grid.csv"
COMPARISON_FILE = "comparison.csv"

EVENT_COLUMNS = ["t", "agent", "action", "outcome", "reward", "epsilon", "alpha", "mu", "loss"]
METRIC_COLUMNS = ["t", "agent_id", "C", "collision_rate"]
BAND_COLUMNS = ["t", "band", "idle_rate"]
GRID_COLUMNS = ["M", "N", "C_bar", "sigma", "jain"]
COMPARISON_COLUMNS = ["M", "N", "variant", "jain", "C_bar"]


class AgentSegments(BaseModel):
    """Throughput of one agent around a jammer window."""

    agent_id: int
    before: Optional[float] = Field(default=None, description="Success rate before the window")
    during: Optional[float] = Field(default=None, description="Success rate inside the window")
    after: Optional[float] = Field(default=None, description="Success rate after the window")
    at_start: Optional[float] = Field(default=None, description="C_m^W at the window start")
    at_end: Optional[float] = Field(default=None, description="C_m^W right after the window")
    final: float = Field(..., description="C_m^W at the horizon")


class JammerReport(BaseModel):
    segments: List[AgentSegments]
    recovered: bool = Field(
        ..., description="Every final throughput within tolerance of its pre-jam value"
    )


class PatternSlot(BaseModel):
    """Band choice and outcome of every agent in one slot."""

    t: int
    actions: List[int]
    outcomes: List[int]


class RunSummary(BaseModel):
    """End-of-run record stored as summary.json."""

    scenario: str
    seed: int
    num_agents: int
    num_bands: int
    horizon: int
    metric_window: int
    sigma: float
    c_bar: float = Field(..., alias="C_bar")
    jain: float
    throughput_sum: float
    finals: List[float]
    digests: List[str]
    jammer: Optional[JammerReport] = None
    pattern: Optional[List[PatternSlot]] = None

    model_config = ConfigDict(populate_by_name=True)


class GridRow(BaseModel):
    """One (M, N) cell of a grid run."""

    num_agents: int
    num_bands: int
    c_bar: Optional[float] = None
    sigma: Optional[float] = None
    jain: Optional[float] = None
    run_dir: Path
    error: Optional[str] = None


class ComparisonRow(BaseModel):
    num_agents: int
    num_bands: int
    variant: str
    jain: Optional[float] = None
    c_bar: Optional[float] = None
    run_dir: Path
    error: Optional[str] = None


class RunArtifacts(BaseModel):
    """Locations of a finished run's files plus its summary."""

    run_dir: Path
    summary: RunSummary

    @property
    def config_path(self) -> Path:
        return self.run_dir / CONFIG_FILE

    @property
    def events_path(self) -> Path:
        return self.run_dir / EVENTS_FILE

    @property
    def metrics_path(self) -> Path:
        return self.run_dir / METRICS_FILE

    @property
    def bands_path(self) -> Path:
        return self.run_dir / BANDS_FILE

    @property
    def summary_path(self) -> Path:
        return self.run_dir / SUMMARY_FILE


class VerificationReport(BaseModel):
    run_dir: Path
    rows: int
    slots_checked: int
    sigma: float
    c_bar: float
    jain: float


__all__ = [
    "AgentSegments",
    "JammerReport",
    "PatternSlot",
    "RunSummary",
    "GridRow",
    "ComparisonRow",
    "RunArtifacts",
    "VerificationReport",
]
