# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Engine and session manager for the run manifest (one SQLite file per run)."""


# type annotations
from __future__ import annotations
from typing import Optional

# standard libs
import os
import logging

# external libs
from sqlalchemy.engine import create_engine, Engine
from sqlalchemy.orm import sessionmaker, scoped_session

# internal libs
from casecontrol.core.logging import Logger, handler
from casecontrol.core.exceptions import ManifestError

# public interface
__all__ = ['Session', 'bind', 'release', 'get_engine', 'MANIFEST_NAME', ]

# initialize logger
log = Logger.with_name(__name__)


MANIFEST_NAME = 'manifest.db'


factory = sessionmaker()
Session = scoped_session(factory)

engine: Optional[Engine] = None


def bind(filepath: str, echo: bool = False) -> Engine:
    """Point the shared session at the SQLite database in `filepath`."""
    global engine
    release()
    os.makedirs(os.path.dirname(os.path.abspath(filepath)), exist_ok=True)
    if echo:
        logging.getLogger('sqlalchemy.engine').addHandler(handler)
        logging.getLogger('sqlalchemy.engine').setLevel(logging.INFO)
    engine = create_engine(f'sqlite:///{filepath}', connect_args={'check_same_thread': False})
    Session.configure(bind=engine)
    log.debug(f'Manifest database: {filepath}')
    return engine


def get_engine() -> Engine:
    """Currently bound engine."""
    if engine is None:
        raise ManifestError('No manifest database bound')
    return engine


def release() -> None:
    """Close sessions and dispose of the current engine, if any."""
    global engine
    Session.remove()
    if engine is not None:
        engine.dispose()
        engine = None
