# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Unit tests for the learning agent."""


# standard libs
import math

# external libs
import pytest
import numpy as np
from hypothesis import given, strategies as st

# internal libs
from casecontrol.core.exceptions import UsageError
from casecontrol.sim.agent import (BetaSpec, SubjectParams, ValueState, beta_shapes, q_update,
                                   choice_probabilities, simulate_subject)
from casecontrol.sim.bandit import EnvTrace


class TestBetaSpec:
    """Unit tests for `BetaSpec` and `beta_shapes`."""

    def test_symmetric(self) -> None:
        assert beta_shapes(BetaSpec(0.5, 4)) == (2.0, 2.0)

    def test_uniform(self) -> None:
        assert beta_shapes(BetaSpec(0.5, 2)) == (1.0, 1.0)
        assert beta_shapes(BetaSpec(0.9, 2)) == (1.0, 1.0)

    def test_grid_corner(self) -> None:
        a, b = BetaSpec(0.01, 30).shapes
        assert a == pytest.approx(1.28)
        assert b == pytest.approx(28.72)

    def test_moments(self) -> None:
        spec = BetaSpec(0.5, 4)
        assert spec.mean == pytest.approx(0.5)
        assert spec.sd == pytest.approx(math.sqrt(4 / (16 * 5)))

    def test_rejects_mode(self) -> None:
        try:
            BetaSpec(1.5, 4)
        except UsageError as error:
            message, = error.args
            assert message == 'BetaSpec mode must be in [0, 1] (given 1.5)'
        else:
            assert False, 'Did not raise UsageError'

    def test_rejects_concentration(self) -> None:
        with pytest.raises(UsageError):
            BetaSpec(0.5, 1.5)

    def test_dict(self) -> None:
        spec = BetaSpec(0.3, 30)
        assert BetaSpec.from_dict(spec.to_dict()) == spec


class TestSubjectParams:
    """Unit tests for `SubjectParams`."""

    def test_clamped(self) -> None:
        params = SubjectParams.clamped(0.0, 1.0)
        assert params.learning_rate == 1e-4
        assert params.temperature == 1 - 1e-4

    def test_rejects_boundary(self) -> None:
        with pytest.raises(UsageError):
            SubjectParams(0.0, 0.5)
        with pytest.raises(UsageError):
            SubjectParams(0.5, 0.0)


class TestQUpdate:
    """Unit tests for `q_update`."""

    def test_midpoint(self) -> None:
        state = q_update(ValueState(np.array([0.0, 0.0])), 0, 1.0, 0.5)
        assert state.values.tolist() == [0.5, 0.0]

    def test_zero_rate_is_identity(self) -> None:
        state = q_update(ValueState(np.array([0.3, 0.7])), 1, 1.0, 0.0)
        assert state.values.tolist() == [0.3, 0.7]

    def test_unit_rate_replaces(self) -> None:
        state = q_update(ValueState(np.array([0.3, 0.7])), 0, 0.0, 1.0)
        assert state.values.tolist() == [0.0, 0.7]

    def test_input_unchanged(self) -> None:
        before = ValueState(np.array([0.2, 0.4]))
        q_update(before, 0, 1.0, 0.5)
        assert before.values.tolist() == [0.2, 0.4]

    def test_rejects_arm(self) -> None:
        try:
            q_update(ValueState.initial(2), 2, 1.0, 0.5)
        except UsageError as error:
            message, = error.args
            assert message == 'Arm index 2 out of range for 2 arms'
        else:
            assert False, 'Did not raise UsageError'

    @given(value=st.floats(-5, 5), reward=st.floats(-5, 5), alpha=st.floats(0, 1))
    def test_contraction(self, value: float, reward: float, alpha: float) -> None:
        state = q_update(ValueState(np.array([value, 0.0])), 0, reward, alpha)
        assert abs(state.values[0] - reward) == pytest.approx((1 - alpha) * abs(value - reward), abs=1e-12)

    @given(rewards=st.lists(st.integers(0, 1), min_size=1, max_size=200), alpha=st.floats(0, 1),
           v0=st.floats(0, 1))
    def test_values_stay_in_unit_interval(self, rewards: list, alpha: float, v0: float) -> None:
        state = ValueState.initial(2, v0)
        for trial, reward in enumerate(rewards):
            state = q_update(state, trial % 2, reward, alpha)
        assert np.all(state.values >= 0) and np.all(state.values <= 1)


class TestChoiceProbabilities:
    """Unit tests for `choice_probabilities`."""

    def test_equal_values(self) -> None:
        probs = choice_probabilities(ValueState(np.array([0.3, 0.3])), 0.2)
        assert probs.tolist() == pytest.approx([0.5, 0.5])

    def test_known_value(self) -> None:
        probs = choice_probabilities(ValueState(np.array([1.0, 0.0])), 1.0)
        assert probs[0] == pytest.approx(math.e / (1 + math.e))
        assert probs[1] == pytest.approx(1 / (1 + math.e))

    def test_argmax_limit(self) -> None:
        probs = choice_probabilities(ValueState(np.array([1.0, 0.0])), 0.01)
        assert probs[0] > 1 - 1e-20
        assert np.all(np.isfinite(probs))

    def test_rejects_temperature(self) -> None:
        with pytest.raises(UsageError):
            choice_probabilities(ValueState.initial(2), 0.0)

    @given(shift=st.floats(-100, 100), tau=st.floats(0.01, 1))
    def test_shift_invariance(self, shift: float, tau: float) -> None:
        values = np.array([0.2, 0.9])
        base = choice_probabilities(ValueState(values), tau)
        moved = choice_probabilities(ValueState(values + shift), tau)
        assert np.allclose(base, moved, atol=1e-12)
        assert abs(moved.sum() - 1) < 1e-12


class TestSimulateSubject:
    """Unit tests for `simulate_subject`."""

    def test_deterministic(self) -> None:
        trace = EnvTrace(np.tile([0.7, 0.3], (100, 1)))
        params = SubjectParams(0.3, 0.2)
        first = simulate_subject(params, trace, 100, 42)
        second = simulate_subject(params, trace, 100, 42)
        assert np.array_equal(first[0], second[0])
        assert np.array_equal(first[1], second[1])

    def test_greedy_agent(self) -> None:
        trace = EnvTrace(np.tile([1.0, 0.0], (500, 1)))
        choices, rewards = simulate_subject(SubjectParams(1 - 1e-4, 0.01), trace, 500, 3)
        first_reward = int(np.argmax(rewards == 1))
        remaining = choices[first_reward + 1:]
        assert np.mean(remaining == 0) >= 0.99

    def test_no_learning_is_uniform(self) -> None:
        n_trials = 10_000
        trace = EnvTrace(np.tile([0.7, 0.3], (n_trials, 1)))
        choices, _ = simulate_subject(SubjectParams(1e-12, 1.0), trace, n_trials, 11)
        assert abs(choices.mean() - 0.5) < 3 * math.sqrt(0.25 / n_trials) + 0.002

    def test_shapes(self) -> None:
        trace = EnvTrace(np.tile([0.5, 0.5], (50, 1)))
        choices, rewards = simulate_subject(SubjectParams(0.5, 0.5), trace, 30, 0)
        assert choices.shape == rewards.shape == (30, )
        assert set(np.unique(choices)) <= {0, 1}
        assert set(np.unique(rewards)) <= {0, 1}

    def test_rejects_long_request(self) -> None:
        trace = EnvTrace(np.tile([0.5, 0.5], (10, 1)))
        with pytest.raises(UsageError):
            simulate_subject(SubjectParams(0.5, 0.5), trace, 11, 0)
