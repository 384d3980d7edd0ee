# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Run manifest database interface, models, and methods."""


# type annotations
from __future__ import annotations

# standard libs
import os

# external libs
from sqlalchemy import inspect
from sqlalchemy.orm import close_all_sessions

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.exceptions import ManifestError
from casecontrol.data.core import Session, bind, release, get_engine, MANIFEST_NAME
from casecontrol.data.model import Entity, Job, JobStatus

# public interface
__all__ = ['initdb', 'truncatedb', 'checkdb', 'open_manifest', 'close_manifest',
           'Session', 'Job', 'JobStatus', 'MANIFEST_NAME', ]

# initialize logger
log = Logger.with_name(__name__)


def initdb() -> None:
    """Initialize database tables."""
    Entity.metadata.create_all(get_engine())


def truncatedb() -> None:
    """Drop and recreate all tables."""
    close_all_sessions()
    log.trace('Dropping all tables')
    Entity.metadata.drop_all(get_engine())
    log.trace('Creating all tables')
    Entity.metadata.create_all(get_engine())
    log.info('Truncated manifest')


def checkdb() -> None:
    """Ensure the manifest tables exist."""
    if not inspect(get_engine()).has_table('job'):
        raise ManifestError('Manifest database has no job table')


def open_manifest(directory: str, create: bool = True) -> str:
    """Bind the manifest inside run `directory`, creating tables when `create`. Returns its path."""
    filepath = os.path.join(directory, MANIFEST_NAME)
    if not create and not os.path.exists(filepath):
        raise ManifestError(f'No manifest found in {directory}')
    bind(filepath)
    if create:
        initdb()
    else:
        checkdb()
    return filepath


def close_manifest() -> None:
    """Release the manifest database."""
    release()
