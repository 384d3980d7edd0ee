# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Step-size and mass-matrix adaptation used during warmup."""


# type annotations
from __future__ import annotations
from typing import Final

# standard libs
import math

# external libs
import numpy as np

# public interface
__all__ = ['DualAveraging', 'WelfordVariance', 'regularize_metric',
           'DEFAULT_GAMMA', 'DEFAULT_T0', 'DEFAULT_KAPPA', ]


DEFAULT_GAMMA: Final[float] = 0.05
DEFAULT_T0: Final[float] = 10.0
DEFAULT_KAPPA: Final[float] = 0.75


class DualAveraging:
    """
    Adapt the step size so the mean acceptance statistic approaches `target`.

    The iterates shrink toward ``log(10 * initial_step)``; the averaged iterate
    (:attr:`final_step_size`) is what sampling uses once warmup ends.
    """

    target: float
    gamma: float
    t0: float
    kappa: float

    mu: float
    count: int
    h_bar: float
    log_step: float
    log_step_bar: float

    def __init__(self: DualAveraging, initial_step: float, target: float = 0.8, gamma: float = DEFAULT_GAMMA,
                 t0: float = DEFAULT_T0, kappa: float = DEFAULT_KAPPA) -> None:
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.restart(initial_step)

    def restart(self: DualAveraging, initial_step: float) -> None:
        """Forget history and start over from `initial_step`."""
        self.mu = math.log(10 * initial_step)
        self.count = 0
        self.h_bar = 0.0
        self.log_step = math.log(initial_step)
        self.log_step_bar = 0.0

    def update(self: DualAveraging, accept_stat: float) -> float:
        """Record one iteration's acceptance statistic and return the next step size."""
        accept_stat = accept_stat if math.isfinite(accept_stat) else 0.0
        self.count += 1
        eta = 1 / (self.count + self.t0)
        self.h_bar = (1 - eta) * self.h_bar + eta * (self.target - accept_stat)
        self.log_step = self.mu - math.sqrt(self.count) / self.gamma * self.h_bar
        weight = self.count ** -self.kappa
        self.log_step_bar = weight * self.log_step + (1 - weight) * self.log_step_bar
        return math.exp(self.log_step)

    @property
    def step_size(self: DualAveraging) -> float:
        return math.exp(self.log_step)

    @property
    def final_step_size(self: DualAveraging) -> float:
        return math.exp(self.log_step_bar) if self.count else self.step_size


class WelfordVariance:
    """Streaming per-coordinate mean and variance."""

    def __init__(self: WelfordVariance, dim: int) -> None:
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self: WelfordVariance, value: np.ndarray) -> None:
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)

    @property
    def variance(self: WelfordVariance) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        return self.m2 / (self.count - 1)


def regularize_metric(variance: np.ndarray, count: int, weight: float = 5.0) -> np.ndarray:
    """Shrink an estimated variance toward one, as if `weight` extra unit-variance draws were seen."""
    return (count * np.asarray(variance) + weight) / (count + weight)
