# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Graceful interruption of long runs.

Handlers only record the signal. The scheduler polls `check_signal` between
jobs, stops submitting, and lets running jobs finish so the manifest stays
consistent for a later resume.
"""


# type annotations
from __future__ import annotations
from typing import Optional, Final, Dict
from types import FrameType

# standard libs
import signal

# internal libs
from casecontrol.core.logging import Logger

# public interface
__all__ = ['SIGNAL_MAP', 'SignalFlag', 'check_signal', 'reset_signal', 'register_handlers', 'ignore_signals', ]

# initialize logger
log = Logger.with_name(__name__)


SIGNAL_MAP: Final[Dict[int, str]] = {
    int(signal.SIGINT): 'SIGINT',
    int(signal.SIGTERM): 'SIGTERM',
    int(signal.SIGUSR1): 'SIGUSR1',
    int(signal.SIGUSR2): 'SIGUSR2',
}


class SignalFlag:
    """Remembers the most recent signal received."""

    def __init__(self: SignalFlag) -> None:
        self.received: Optional[int] = None

    def __call__(self: SignalFlag, signum: int, frame: Optional[FrameType]) -> None:
        if self.received is None:
            log.warning(f'Received {SIGNAL_MAP.get(signum, signum)}: halting after running jobs finish')
        self.received = signum


FLAG: Final[SignalFlag] = SignalFlag()


def check_signal() -> Optional[int]:
    """Signal number if one was received, else None."""
    return FLAG.received


def reset_signal() -> None:
    FLAG.received = None


def register_handlers() -> None:
    """Install the flag for every mapped signal."""
    for signum in SIGNAL_MAP:
        signal.signal(signum, FLAG)


def ignore_signals() -> None:
    """
    Ignore interrupts in a pool worker so the running job finishes.

    A terminal interrupt reaches the whole process group; only the parent acts on it.
    SIGTERM keeps its default action so the pool can still terminate its workers.
    """
    for signum in SIGNAL_MAP:
        if signum != signal.SIGTERM:
            signal.signal(signum, signal.SIG_IGN)
