"""
Conversions between catalog rows and their pydantic schemas.
"""

from typing import Iterable, List, Type

from pydantic import BaseModel
from sqlalchemy.orm import DeclarativeBase


def sqlalchemy_to_pydantic[T: BaseModel](
    sqlalchemy_obj: DeclarativeBase, pydantic_model: Type[T]
) -> T:
    """Validate a catalog row into its schema."""
    return pydantic_model.model_validate(sqlalchemy_obj)


def sqlalchemy_list_to_pydantic[T: BaseModel](
    rows: Iterable[DeclarativeBase], pydantic_model: Type[T]
) -> List[T]:
    return [pydantic_model.model_validate(row) for row in rows]


def pydantic_to_sqlalchemy[T: DeclarativeBase](
    pydantic_obj: BaseModel,
    sqlalchemy_model: Type[T],
    exclude_none: bool = True,
) -> T:
    """
    Build a catalog row from a schema instance.

    Unset IDs are dropped so the database assigns them.
    """
    data = pydantic_obj.model_dump(exclude_none=exclude_none)
    return sqlalchemy_model(**data)


__all__ = [
    "sqlalchemy_to_pydantic",
    "sqlalchemy_list_to_pydantic",
    "pydantic_to_sqlalchemy",
]
