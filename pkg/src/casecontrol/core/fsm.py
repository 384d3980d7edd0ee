# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Finite state machines driving chains and the job scheduler.

A machine maps each non-terminal state to an action returning the next state.
Running ends when the HALT member of the state enum is reached, or when
`halt` is called from outside (checked before every action).
"""


# type annotations
from __future__ import annotations
from typing import Dict, Callable, Type, Optional

# standard libs
from enum import Enum
from abc import ABC

# internal libs
from casecontrol.core.logging import Logger

# public interface
__all__ = ['State', 'StateMachine', ]

# initialize logger
log = Logger.with_name(__name__)


class State(Enum):
    """Base for state enums; every subclass defines HALT."""


class StateMachine(ABC):
    """Drive `actions` from `state` until HALT."""

    state: State
    states: Type[State]
    actions: Dict[State, Callable[[], State]]

    transitions: int = 0
    halt_requested: bool = False

    @property
    def terminal(self: StateMachine) -> State:
        return self.states.HALT  # noqa: every State subclass defines HALT

    def next(self: StateMachine) -> State:
        """Run the action for the current state and return its successor."""
        if self.halt_requested:
            return self.terminal
        action: Optional[Callable[[], State]] = self.actions.get(self.state)
        if action is None:
            raise RuntimeError(f'{self.__class__.__name__} has no action for {self.state}')
        try:
            return action()
        except Exception:
            log.debug(f'{self.__class__.__name__} failed in {self.state.name} '
                      f'after {self.transitions} transitions')
            raise

    def run(self: StateMachine) -> None:
        """Step until the terminal state."""
        while self.state is not self.terminal:
            self.state = self.next()
            self.transitions += 1

    def halt(self: StateMachine) -> None:
        """Request termination before the next action."""
        self.halt_requested = True
