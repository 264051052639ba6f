"""
Models package.

Catalog tables are declared twice under the same class name: first as a
SQLAlchemy table, then as a pydantic schema. The schema must carry exactly the
table's columns, since catalog rows are built from `schema.model_dump()` and
read back with `model_validate(row)`.
"""

from typing import Dict, FrozenSet

from pydantic import BaseModel, ConfigDict
from sqlalchemy.orm import DeclarativeBase


class Base(DeclarativeBase):
    """SQLAlchemy declarative base for the run catalog."""

    pass


# table class name -> column names
_catalog_columns: Dict[str, FrozenSet[str]] = {}


class CatalogTableMeta(type(Base)):
    """Records the column names of every catalog table."""

    def __new__(cls, name: str, bases: tuple, namespace: dict, **kwargs):
        cls = super().__new__(cls, name, bases, namespace, **kwargs)
        if not namespace.get("__abstract__", False):
            _catalog_columns[name] = frozenset(cls.__table__.columns.keys())
        return cls


class CatalogSchemaMeta(type(BaseModel)):
    """Refuses a schema without a same-named table or with different columns."""

    def __new__(cls, name: str, bases: tuple, namespace: dict, **kwargs):
        cls = super().__new__(cls, name, bases, namespace, **kwargs)
        if namespace.get("__abstract__", False):
            return cls

        columns = _catalog_columns.get(name)
        if columns is None:
            raise AssertionError(
                f"Catalog schema '{name}' has no catalog table. "
                f"Declare the SQLAlchemy model with the same name first."
            )
        fields = frozenset(cls.model_fields)
        if fields != columns:
            missing = ", ".join(sorted(columns - fields)) or "-"
            extra = ", ".join(sorted(fields - columns)) or "-"
            raise AssertionError(
                f"Catalog schema '{name}' does not match its table "
                f"(missing fields: {missing}; fields without a column: {extra})"
            )
        return cls


class CatalogTable(Base, metaclass=CatalogTableMeta):
    __abstract__ = True


class CatalogSchema(BaseModel, metaclass=CatalogSchemaMeta):
    __abstract__ = True

    model_config = ConfigDict(from_attributes=True)


def catalog_columns() -> Dict[str, FrozenSet[str]]:
    """Column names of every declared catalog table, by class name."""
    return dict(_catalog_columns)


__all__ = [
    "Base",
    "CatalogTable",
    "CatalogSchema",
    "catalog_columns",
]
