# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Unit tests for state machines and result threads."""


# type annotations
from __future__ import annotations

# external libs
import pytest

# internal libs
from casecontrol.core.fsm import State, StateMachine
from casecontrol.core.thread import Thread


class CountState(State):
    COUNT = 0
    HALT = 1


class Counter(StateMachine):
    """Count to a limit, one transition per increment."""

    state = CountState.COUNT
    states = CountState

    def __init__(self: Counter, limit: int) -> None:
        self.limit = limit
        self.value = 0
        self.actions = {CountState.COUNT: self.count}

    def count(self: Counter) -> CountState:
        self.value += 1
        if self.limit < 0:
            raise ValueError('negative limit')
        return CountState.HALT if self.value >= self.limit else CountState.COUNT


class CounterThread(Thread):

    def __init__(self: CounterThread, counter: Counter) -> None:
        self.counter = counter
        super().__init__(name='counter')

    def run_with_exceptions(self: CounterThread) -> int:
        self.counter.run()
        return self.counter.value


class TestStateMachine:
    """Unit tests for `StateMachine`."""

    def test_run(self) -> None:
        counter = Counter(5)
        counter.run()
        assert counter.value == 5
        assert counter.transitions == 5
        assert counter.state is CountState.HALT

    def test_halt(self) -> None:
        counter = Counter(5)
        counter.halt()
        counter.run()
        assert counter.value == 0

    def test_error_propagates(self) -> None:
        with pytest.raises(ValueError):
            Counter(-1).run()


class TestThread:
    """Unit tests for `Thread`."""

    def test_result(self) -> None:
        assert CounterThread.new(Counter(3)).join() == 3

    def test_error(self) -> None:
        thread = CounterThread.new(Counter(-1))
        try:
            thread.join()
        except ValueError as error:
            message, = error.args
            assert message == 'negative limit'
        else:
            assert False, 'Did not raise ValueError'
        assert thread.elapsed >= 0
