"""
Catalog service layer - records and looks up finished runs.
"""

from pathlib import Path
from typing import Callable, List, Optional, Tuple, TypeVar

from sqlalchemy import select
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session

from lib.database import CATALOG_FILE, get_db_session, init_db
from lib.errors import CatalogError, FairshareError
from models.artifacts import RunSummary
from models.config import ExperimentConfig
from models.run import RunDB, RunSchema
from models.transformations import (
    pydantic_to_sqlalchemy,
    sqlalchemy_list_to_pydantic,
    sqlalchemy_to_pydantic,
)
from services.base_service import guarded

T = TypeVar("T")


def run_record(
    config: ExperimentConfig,
    run_dir: Path,
    summary: Optional[RunSummary] = None,
    label: str = "",
    error: Optional[str] = None,
) -> RunSchema:
    """Catalog entry for a run, successful or not."""
    network = config.network
    return RunSchema(
        scenario=config.scenario,
        label=label,
        num_agents=network.num_agents,
        num_bands=network.num_bands,
        channel_model=network.channel_model.value,
        agent_kinds=",".join(kind.value for kind in config.agent_kinds),
        seed=summary.seed if summary is not None else config.seed,
        horizon=network.horizon,
        sigma=summary.sigma if summary else None,
        c_bar=summary.c_bar if summary else None,
        jain=summary.jain if summary else None,
        throughput_sum=summary.throughput_sum if summary else None,
        output_dir=str(run_dir),
        status="failed" if error else "ok",
        error=error,
    )


def _in_catalog(out_root: Path, action: Callable[[Session], T]) -> Tuple[Optional[T], Optional[FairshareError]]:
    """Run `action` in a catalog session, as a (result, error) pair."""

    def run() -> T:
        try:
            init_db(out_root)
            with get_db_session(out_root) as session:
                return action(session)
        except (SQLAlchemyError, OSError) as e:
            raise CatalogError(f"{Path(out_root) / CATALOG_FILE}: {e}") from e

    return guarded(run)


class CatalogService:
    """Service for the run catalog. Only the orchestrating process writes to it."""

    @staticmethod
    def record(out_root: Path, run: RunSchema) -> Tuple[Optional[RunSchema], Optional[FairshareError]]:
        """
        Add a run to the catalog.

        Returns:
            Tuple of (stored run, error). If an error occurs, run is None.
        """

        def add(session: Session) -> RunSchema:
            row = pydantic_to_sqlalchemy(run, RunDB)
            session.add(row)
            session.flush()
            return sqlalchemy_to_pydantic(row, RunSchema)

        return _in_catalog(out_root, add)

    @staticmethod
    def list_runs(
        out_root: Path, scenario: Optional[str] = None, limit: int = 50
    ) -> Tuple[Optional[List[RunSchema]], Optional[FairshareError]]:
        """Most recent runs first, optionally filtered by scenario."""

        def query(session: Session) -> List[RunSchema]:
            stmt = select(RunDB).order_by(RunDB.id.desc()).limit(limit)
            if scenario:
                stmt = stmt.where(RunDB.scenario == scenario)
            rows = session.execute(stmt).scalars().all()
            return sqlalchemy_list_to_pydantic(rows, RunSchema)

        return _in_catalog(out_root, query)

    @staticmethod
    def get_run(out_root: Path, run_id: int) -> Tuple[Optional[RunSchema], Optional[FairshareError]]:
        def fetch(session: Session) -> RunSchema:
            row = session.get(RunDB, run_id)
            if not row:
                raise CatalogError(f"Run with ID {run_id} not found")
            return sqlalchemy_to_pydantic(row, RunSchema)

        return _in_catalog(out_root, fetch)
