# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Manifest models."""


# type annotations
from __future__ import annotations
from typing import List, Dict, Any, Type, Optional

# standard libs
from enum import Enum
from datetime import datetime

# external libs
from sqlalchemy import Column, func
from sqlalchemy.orm import Query, DeclarativeBase, Mapped, mapped_column
from sqlalchemy.orm.exc import NoResultFound
from sqlalchemy.ext.declarative import declared_attr
from sqlalchemy.types import Integer, Float, DateTime, Text, JSON as _JSON

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.data.core import Session

# public interface
__all__ = ['Entity', 'Job', 'JobStatus', 'to_json_type', ]

# initialize logger
log = Logger.with_name(__name__)


def to_json_type(value: Any) -> Any:
    """Convert `value` to alternate representation for JSON."""
    return value if not isinstance(value, datetime) else value.isoformat(sep=' ')


# Pre-defining types shortens declarations and makes changes easier
TEXT = Text()
INTEGER = Integer()
FLOAT = Float()
DATETIME = DateTime(timezone=True)
JSON = _JSON()


class Entity(DeclarativeBase):
    """Core mixin class for all entities."""

    columns: Dict[str, type] = {}

    @declared_attr
    def __tablename__(cls: Type[Entity]) -> str:  # noqa: cls
        """The table name should be lower-case."""
        return cls.__name__.lower()

    def __repr__(self: Entity) -> str:
        """String representation."""
        attrs = ', '.join([f'{name}={repr(getattr(self, name))}' for name in self.columns])
        return f'{self.__class__.__name__}({attrs})'

    def to_tuple(self: Entity) -> tuple:
        """Convert fields into standard tuple."""
        return tuple([getattr(self, name) for name in self.columns])

    def to_dict(self: Entity) -> Dict[str, Any]:
        """Convert record to dictionary."""
        return dict(zip(self.columns, self.to_tuple()))

    def to_json(self: Entity) -> Dict[str, Any]:
        """Convert record to JSON-serializable dictionary."""
        return {key: to_json_type(value) for key, value in self.to_dict().items()}

    @classmethod
    def from_dict(cls: Type[Entity], data: Dict[str, Any]) -> Entity:
        """Build from existing dictionary."""
        return cls(**data)  # noqa: __init__ instrumented by declarative_base

    @classmethod
    def query(cls: Type[Entity], *fields: Column, caching: bool = True) -> Query:
        """Get query interface for entity with scoped session."""
        target = fields or [cls, ]
        if not caching:
            Session.expire_all()
        return Session.query(*target)

    @classmethod
    def count(cls: Type[Entity]) -> int:
        """Count of total existing records in database."""
        return cls.query().count()

    @classmethod
    def add_all(cls: Type[Entity], items: List[Entity]) -> List[Entity]:
        """Add many items to the database at once."""
        item_ids = [item.id for item in items]  # noqa: id not defined on base
        try:
            Session.add_all(items)
            Session.commit()
        except Exception:
            Session.rollback()
            raise
        else:
            log.trace(f'Added {len(item_ids)} {cls.__tablename__}s')
            return items

    @classmethod
    def update_all(cls: Type[Entity], changes: List[Dict[str, Any]]) -> None:
        """Bulk update."""
        if changes:
            try:
                Session.bulk_update_mappings(cls, changes)
                Session.commit()
            except Exception:
                Session.rollback()
                raise
            log.trace(f'Updated {len(changes)} {cls.__tablename__}s')

    @classmethod
    def update(cls: Type[Entity], id: str, **changes) -> None:
        """Update by `id` with `changes`."""
        cls.update_all([{'id': id, **changes}, ])


class JobStatus(str, Enum):
    """Lifecycle of a planned job."""
    PENDING = 'pending'
    DONE = 'done'
    FAILED = 'failed'


class Job(Entity):
    """One planned unit of work with the hashes that chain it to its inputs."""

    id: Mapped[str] = mapped_column(TEXT, primary_key=True, nullable=False)
    kind: Mapped[str] = mapped_column(TEXT, nullable=False)
    position: Mapped[int] = mapped_column(INTEGER, nullable=False)
    keys: Mapped[dict] = mapped_column(JSON, nullable=False, default={})
    depends: Mapped[list] = mapped_column(JSON, nullable=False, default=[])
    status: Mapped[str] = mapped_column(TEXT, nullable=False, default=JobStatus.PENDING.value)

    input_hash: Mapped[Optional[str]] = mapped_column(TEXT, nullable=True)
    output_hash: Mapped[Optional[str]] = mapped_column(TEXT, nullable=True)
    chain_hash: Mapped[Optional[str]] = mapped_column(TEXT, nullable=True)
    outputs: Mapped[list] = mapped_column(JSON, nullable=False, default=[])

    attempt: Mapped[int] = mapped_column(INTEGER, nullable=False, default=0)
    start_time: Mapped[Optional[datetime]] = mapped_column(DATETIME, nullable=True)
    completion_time: Mapped[Optional[datetime]] = mapped_column(DATETIME, nullable=True)
    elapsed: Mapped[Optional[float]] = mapped_column(FLOAT, nullable=True)
    error: Mapped[Optional[str]] = mapped_column(TEXT, nullable=True)

    columns = {
        'id': str,
        'kind': str,
        'position': int,
        'keys': dict,
        'depends': list,
        'status': str,
        'input_hash': str,
        'output_hash': str,
        'chain_hash': str,
        'outputs': list,
        'attempt': int,
        'start_time': datetime,
        'completion_time': datetime,
        'elapsed': float,
        'error': str,
    }

    class NotFound(Exception):
        """No job with the requested id."""

    @classmethod
    def from_id(cls: Type[Job], id: str, caching: bool = True) -> Job:
        """Look up job by unique `id`."""
        try:
            return cls.query(caching=caching).filter_by(id=id).one()
        except NoResultFound as error:
            raise cls.NotFound(f'No job with id={id}') from error

    @classmethod
    def new(cls: Type[Job], id: str, kind: str, position: int, keys: Dict[str, Any] = None,
            depends: List[str] = None) -> Job:
        """Create a new pending job."""
        return Job(id=id, kind=kind, position=position, keys=dict(keys or {}), depends=list(depends or []),
                   status=JobStatus.PENDING.value, outputs=[], attempt=0)

    @classmethod
    def select_all(cls: Type[Job]) -> List[Job]:
        """Every job in plan order."""
        return cls.query(caching=False).order_by(cls.position).all()

    @classmethod
    def select_status(cls: Type[Job], status: JobStatus) -> List[Job]:
        """Jobs with `status` in plan order."""
        return cls.query(caching=False).filter(cls.status == JobStatus(status).value).order_by(cls.position).all()

    @classmethod
    def count_by_status(cls: Type[Job]) -> Dict[str, int]:
        """Number of jobs in each status."""
        counts = {status.value: 0 for status in JobStatus}
        for status, count in cls.query(cls.status, func.count(cls.id), caching=False).group_by(cls.status).all():
            counts[status] = count
        return counts

    @classmethod
    def mark_done(cls: Type[Job], id: str, input_hash: str, output_hash: str, chain_hash: str,
                  outputs: List[str], start_time: datetime, elapsed: float, attempt: int) -> None:
        cls.update(id, status=JobStatus.DONE.value, input_hash=input_hash, output_hash=output_hash,
                   chain_hash=chain_hash, outputs=outputs, start_time=start_time,
                   completion_time=datetime.now().astimezone(), elapsed=elapsed, attempt=attempt, error=None)

    @classmethod
    def mark_failed(cls: Type[Job], id: str, error: str, attempt: int, start_time: Optional[datetime] = None,
                    elapsed: Optional[float] = None) -> None:
        cls.update(id, status=JobStatus.FAILED.value, error=error, attempt=attempt, start_time=start_time,
                   completion_time=datetime.now().astimezone(), elapsed=elapsed)

    @classmethod
    def mark_pending(cls: Type[Job], ids: List[str]) -> None:
        """Reset `ids` to pending and forget their hashes."""
        cls.update_all([{'id': id, 'status': JobStatus.PENDING.value, 'output_hash': None, 'chain_hash': None,
                         'error': None} for id in ids])
