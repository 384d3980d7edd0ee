# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Threads that hand back a result or re-raise their failure on join."""


# type annotations
from __future__ import annotations
from typing import Optional, Type, Any

# standard libs
import time
import threading
from abc import ABC, abstractmethod

# public interface
__all__ = ['Thread', ]


class Thread(threading.Thread, ABC):
    """Daemon thread whose `join` returns the value of `run_with_exceptions`."""

    def __init__(self: Thread, name: str) -> None:
        super().__init__(name=name, daemon=True)
        self.result: Any = None
        self.error: Optional[BaseException] = None
        self.elapsed: float = 0.0

    @abstractmethod
    def run_with_exceptions(self: Thread) -> Any:
        """Work done on the thread; may raise."""

    def run(self: Thread) -> None:
        start = time.perf_counter()
        try:
            self.result = self.run_with_exceptions()
        except Exception as error:
            self.error = error
        finally:
            self.elapsed = time.perf_counter() - start

    @classmethod
    def new(cls: Type[Thread], *args, **kwargs) -> Thread:
        """Construct and start."""
        thread = cls(*args, **kwargs)
        thread.start()
        return thread

    def join(self: Thread, timeout: Optional[float] = None) -> Any:
        """Wait for the thread, then re-raise its error or return its result."""
        super().join(timeout=timeout)
        if self.error is not None:
            raise self.error
        return self.result
