"""
Run catalog: one row per finished (or failed) simulation run.

The SQLAlchemy model is declared first, then the pydantic schema with the same
name; both are exported under DB/Schema aliases.
"""

from datetime import datetime, timezone
from typing import Optional

from pydantic import Field
from sqlalchemy import Column, DateTime, Float, Integer, String, Text

from models import CatalogTable, CatalogSchema


def _utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(tzinfo=None)


# ========== SQLAlchemy Models ==========


class Run(CatalogTable):
    """SQLAlchemy Run model."""

    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, autoincrement=True)
    scenario = Column(String(32), nullable=False)
    label = Column(String(100), nullable=False, default="")
    num_agents = Column(Integer, nullable=False)
    num_bands = Column(Integer, nullable=False)
    channel_model = Column(String(16), nullable=False)
    agent_kinds = Column(String(400), nullable=False)
    seed = Column(Integer, nullable=False)
    horizon = Column(Integer, nullable=False)
    sigma = Column(Float, nullable=True)
    c_bar = Column(Float, nullable=True)
    jain = Column(Float, nullable=True)
    throughput_sum = Column(Float, nullable=True)
    output_dir = Column(Text, nullable=False)
    status = Column(String(16), nullable=False, default="ok")  # ok | failed
    error = Column(Text, nullable=True)
    created_at = Column(DateTime, default=_utcnow, nullable=False)


RunDB = Run


# ========== Pydantic Models ==========


class Run(CatalogSchema):
    """Pydantic Run model for validation and display."""

    id: Optional[int] = Field(default=None, description="Catalog ID")
    scenario: str = Field(..., description="single, grid, jammer, adhoc or compare", max_length=32)
    label: str = Field(default="", description="Cell or variant label", max_length=100)
    num_agents: int = Field(..., description="Number of sources M", ge=1)
    num_bands: int = Field(..., description="Number of bands N", ge=1)
    channel_model: str = Field(..., description="broadcast or adhoc")
    agent_kinds: str = Field(..., description="Comma-separated policy per source")
    seed: int = Field(..., description="Run seed")
    horizon: int = Field(..., description="Slots simulated", ge=1)
    sigma: Optional[float] = Field(default=None, description="Throughput standard deviation")
    c_bar: Optional[float] = Field(default=None, description="Network throughput")
    jain: Optional[float] = Field(default=None, description="Jain fairness index")
    throughput_sum: Optional[float] = Field(default=None, description="Sum of final throughputs")
    output_dir: str = Field(..., description="Artifact directory")
    status: str = Field(default="ok", description="ok or failed")
    error: Optional[str] = Field(default=None, description="Failure message")
    created_at: datetime = Field(default_factory=_utcnow, description="Catalog timestamp")


RunSchema = Run


__all__ = ["RunDB", "RunSchema"]
