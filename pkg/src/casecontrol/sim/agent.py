# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Generative reinforcement-learning agent.

A subject learns arm values with a single learning rate (Rescorla-Wagner update
on the chosen arm) and chooses by softmax over values divided by a temperature.
The same update and choice rule are replayed by the likelihood kernel in
:mod:`casecontrol.inference.kernel` when fitting.
"""


# type annotations
from __future__ import annotations
from typing import Tuple, Dict, Any, Type, Final

# standard libs
import math
from dataclasses import dataclass, field

# external libs
import numpy as np
from scipy.special import softmax

# internal libs
from casecontrol.core.exceptions import UsageError
from casecontrol.core.seeding import SeedLike
from casecontrol.sim.bandit import EnvTrace, draw_reward

# public interface
__all__ = ['BetaSpec', 'SubjectParams', 'ValueState', 'beta_shapes', 'q_update', 'choice_probabilities',
           'simulate_subject', 'DEFAULT_V0', 'TEMPERATURE_FLOOR', 'PARAM_CLAMP', ]


DEFAULT_V0: Final[float] = 0.5
TEMPERATURE_FLOOR: Final[float] = 1e-3
PARAM_CLAMP: Final[float] = 1e-4


@dataclass(frozen=True)
class BetaSpec:
    """
    Beta distribution in mode/concentration form.

    Shapes are ``a = mode * (concentration - 2) + 1`` and
    ``b = (1 - mode) * (concentration - 2) + 1``, so ``concentration = 2`` is uniform
    regardless of `mode`.

    Example:
        >>> BetaSpec(mode=0.5, concentration=4).shapes
        (2.0, 2.0)
    """

    mode: float
    concentration: float

    def __post_init__(self: BetaSpec) -> None:
        if not (math.isfinite(self.mode) and 0 <= self.mode <= 1):
            raise UsageError(f'BetaSpec mode must be in [0, 1] (given {self.mode})')
        if not (math.isfinite(self.concentration) and self.concentration >= 2):
            raise UsageError(f'BetaSpec concentration must be >= 2 (given {self.concentration})')

    @property
    def shapes(self: BetaSpec) -> Tuple[float, float]:
        return beta_shapes(self)

    @property
    def mean(self: BetaSpec) -> float:
        a, b = self.shapes
        return a / (a + b)

    @property
    def sd(self: BetaSpec) -> float:
        a, b = self.shapes
        return math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))

    def sample(self: BetaSpec, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` values from this distribution."""
        a, b = self.shapes
        return rng.beta(a, b, size=size)

    def to_dict(self: BetaSpec) -> Dict[str, float]:
        return {'mode': float(self.mode), 'concentration': float(self.concentration)}

    @classmethod
    def from_dict(cls: Type[BetaSpec], data: Dict[str, Any]) -> BetaSpec:
        return cls(mode=float(data['mode']), concentration=float(data['concentration']))


def beta_shapes(spec: BetaSpec) -> Tuple[float, float]:
    """Shape parameters (a, b) of a mode/concentration Beta."""
    scale = spec.concentration - 2
    return spec.mode * scale + 1, (1 - spec.mode) * scale + 1


@dataclass(frozen=True)
class SubjectParams:
    """Learning rate and softmax temperature of one subject."""

    learning_rate: float
    temperature: float

    def __post_init__(self: SubjectParams) -> None:
        if not (0 < self.learning_rate < 1):
            raise UsageError(f'Learning rate must be in (0, 1) (given {self.learning_rate})')
        if not (0 < self.temperature <= 1):
            raise UsageError(f'Temperature must be in (0, 1] (given {self.temperature})')

    @classmethod
    def clamped(cls: Type[SubjectParams], learning_rate: float, temperature: float,
                clamp: float = PARAM_CLAMP) -> SubjectParams:
        """Build from sampled values, clamping both into ``[clamp, 1 - clamp]``."""
        return cls(learning_rate=float(min(max(learning_rate, clamp), 1 - clamp)),
                   temperature=float(min(max(temperature, clamp), 1 - clamp)))

    def to_dict(self: SubjectParams) -> Dict[str, float]:
        return {'alpha': self.learning_rate, 'tau': self.temperature}


@dataclass(frozen=True, eq=False)
class ValueState:
    """Current value estimate of every arm."""

    values: np.ndarray
    v0: float = DEFAULT_V0
    n_arms: int = field(init=False)

    def __post_init__(self: ValueState) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise UsageError('ValueState requires a non-empty vector of values')
        if not np.all(np.isfinite(values)):
            raise UsageError('ValueState values must be finite')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'n_arms', values.size)

    @classmethod
    def initial(cls: Type[ValueState], n_arms: int = 2, v0: float = DEFAULT_V0) -> ValueState:
        return cls(values=np.full(n_arms, v0, dtype=float), v0=v0)


def q_update(state: ValueState, chosen_arm: int, reward: float, alpha: float) -> ValueState:
    """Move the chosen arm's value toward `reward` by fraction `alpha`."""
    if not (0 <= chosen_arm < state.n_arms):
        raise UsageError(f'Arm index {chosen_arm} out of range for {state.n_arms} arms')
    if not (0 <= alpha <= 1):
        raise UsageError(f'Learning rate must be in [0, 1] (given {alpha})')
    values = state.values.copy()
    values[chosen_arm] += alpha * (reward - values[chosen_arm])
    return ValueState(values=values, v0=state.v0)


def choice_probabilities(state: ValueState, tau: float) -> np.ndarray:
    """Softmax over ``values / tau``."""
    if not tau > 0:
        raise UsageError(f'Temperature must be positive (given {tau})')
    return softmax(state.values / tau)


def simulate_subject(params: SubjectParams, env_trace: EnvTrace, n_trials: int, rng_seed: SeedLike,
                     v0: float = DEFAULT_V0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Simulate one subject playing the bandit for `n_trials`.

    Each trial draws a choice from the softmax, draws a binary reward for the chosen
    arm at that trial's probability, then updates the chosen value.
    The temperature is floored at `TEMPERATURE_FLOOR`.

    Returns:
        choices, rewards: integer arrays of length `n_trials`.
    """
    if n_trials < 1:
        raise UsageError(f'Expected at least one trial (given {n_trials})')
    if n_trials > env_trace.n_trials:
        raise UsageError(f'Environment trace has {env_trace.n_trials} trials, {n_trials} requested')
    rng = np.random.default_rng(rng_seed)
    tau = max(params.temperature, TEMPERATURE_FLOOR)
    state = ValueState.initial(env_trace.n_arms, v0)
    choices = np.zeros(n_trials, dtype=np.int64)
    rewards = np.zeros(n_trials, dtype=np.int64)
    for trial in range(n_trials):
        cumulative = np.cumsum(choice_probabilities(state, tau))
        arm = min(int(np.searchsorted(cumulative, rng.random(), side='right')), state.n_arms - 1)
        reward = draw_reward(env_trace, trial, arm, rng)
        state = q_update(state, arm, reward, params.learning_rate)
        choices[trial] = arm
        rewards[trial] = reward
    return choices, rewards
