"""
Run catalog database: one SQLite file per output root.
"""

from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import sessionmaker

from models import Base

CATALOG_FILE = "catalog.db"


@lru_cache(maxsize=None)
def _engine_for(db_path: str) -> Engine:
    return create_engine(f"sqlite:///{db_path}", echo=False)


def get_engine(out_root: Path) -> Engine:
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    return _engine_for(str((out_root / CATALOG_FILE).resolve()))


def init_db(out_root: Path):
    """Create the catalog tables under `out_root` if they do not exist."""
    # registers the catalog tables on Base.metadata
    import models.run  # noqa: F401

    Base.metadata.create_all(get_engine(out_root))


@contextmanager
def get_db_session(out_root: Path):
    """
    Context manager for catalog sessions.

    Usage:
        with get_db_session(out_root) as session:
            session.query(RunDB).all()
    """
    # expire_on_commit=False keeps rows readable after the session closes
    session = sessionmaker(bind=get_engine(out_root), expire_on_commit=False)()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
