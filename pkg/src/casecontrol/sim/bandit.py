# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Roving-probability bandit environment."""


# type annotations
from __future__ import annotations
from typing import Tuple, Dict, Any, Type, Optional

# standard libs
import csv
from dataclasses import dataclass

# external libs
import numpy as np

# internal libs
from casecontrol.core.exceptions import UsageError
from casecontrol.core.seeding import SeedLike

# public interface
__all__ = ['RovingBanditConfig', 'EnvTrace', 'reflect', 'generate_trace', 'draw_reward', ]


@dataclass(frozen=True)
class RovingBanditConfig:
    """Independent reflected Gaussian random walk on each arm's reward probability."""

    n_arms: int = 2
    p_init: Tuple[float, ...] = (0.7, 0.3)
    drift_sd: float = 0.05
    p_bounds: Tuple[float, float] = (0.2, 0.8)
    seed: int = 0

    def __post_init__(self: RovingBanditConfig) -> None:
        object.__setattr__(self, 'p_init', tuple(float(p) for p in self.p_init))
        object.__setattr__(self, 'p_bounds', tuple(float(p) for p in self.p_bounds))
        lo, hi = self.p_bounds
        if self.n_arms < 1:
            raise UsageError(f'Expected at least one arm (given {self.n_arms})')
        if len(self.p_init) != self.n_arms:
            raise UsageError(f'Expected {self.n_arms} initial probabilities (given {len(self.p_init)})')
        if not (0 <= lo < hi <= 1):
            raise UsageError(f'Probability bounds must satisfy 0 <= lo < hi <= 1 (given {self.p_bounds})')
        if not all(lo <= p <= hi for p in self.p_init):
            raise UsageError(f'Initial probabilities {self.p_init} outside bounds {self.p_bounds}')
        if not self.drift_sd >= 0:
            raise UsageError(f'Drift must be non-negative (given {self.drift_sd})')

    def to_dict(self: RovingBanditConfig) -> Dict[str, Any]:
        return {'n_arms': self.n_arms, 'p_init': list(self.p_init), 'drift_sd': self.drift_sd,
                'p_bounds': list(self.p_bounds), 'seed': self.seed}

    @classmethod
    def from_dict(cls: Type[RovingBanditConfig], data: Dict[str, Any]) -> RovingBanditConfig:
        return cls(n_arms=int(data['n_arms']), p_init=tuple(data['p_init']), drift_sd=float(data['drift_sd']),
                   p_bounds=tuple(data['p_bounds']), seed=int(data.get('seed', 0)))


@dataclass(frozen=True, eq=False)
class EnvTrace:
    """Read-only per-trial, per-arm reward probabilities."""

    probabilities: np.ndarray
    p_bounds: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self: EnvTrace) -> None:
        table = np.array(self.probabilities, dtype=float)
        if table.ndim != 2 or table.shape[0] < 1:
            raise UsageError(f'Expected trials x arms matrix (given shape {table.shape})')
        table.setflags(write=False)
        object.__setattr__(self, 'probabilities', table)

    @property
    def n_trials(self: EnvTrace) -> int:
        return self.probabilities.shape[0]

    @property
    def n_arms(self: EnvTrace) -> int:
        return self.probabilities.shape[1]

    def __eq__(self: EnvTrace, other: Any) -> bool:
        return isinstance(other, EnvTrace) and np.array_equal(self.probabilities, other.probabilities)

    def window(self: EnvTrace, start: int, length: int) -> EnvTrace:
        """Trace restricted to trials ``[start, start + length)``."""
        if start < 0 or length < 1 or start + length > self.n_trials:
            raise UsageError(f'Window [{start}, {start + length}) outside trace of {self.n_trials} trials')
        return EnvTrace(self.probabilities[start:start + length], self.p_bounds)

    def to_csv(self: EnvTrace, filepath: str) -> None:
        """Write long-format (trial, arm, probability) rows."""
        with open(filepath, mode='w', newline='') as stream:
            writer = csv.writer(stream)
            writer.writerow(['trial', 'arm', 'probability'])
            for trial, row in enumerate(self.probabilities):
                for arm, value in enumerate(row):
                    writer.writerow([trial, arm, repr(float(value))])

    @classmethod
    def from_csv(cls: Type[EnvTrace], filepath: str, p_bounds: Tuple[float, float] = (0.0, 1.0)) -> EnvTrace:
        """Read a trace written by :meth:`to_csv`."""
        with open(filepath, mode='r', newline='') as stream:
            rows = [(int(r['trial']), int(r['arm']), float(r['probability'])) for r in csv.DictReader(stream)]
        n_trials = max(r[0] for r in rows) + 1
        n_arms = max(r[1] for r in rows) + 1
        table = np.zeros((n_trials, n_arms))
        for trial, arm, value in rows:
            table[trial, arm] = value
        return cls(table, p_bounds)


def reflect(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Fold `x` back into ``[lo, hi]`` by mirror reflection at both bounds (any distance)."""
    width = hi - lo
    folded = np.mod(np.asarray(x, dtype=float) - lo, 2 * width)
    folded = np.where(folded > width, 2 * width - folded, folded)
    return np.clip(lo + folded, lo, hi)


def generate_trace(config: RovingBanditConfig, n_trials: int, seed: Optional[SeedLike] = None) -> EnvTrace:
    """
    Per-arm reward probabilities following reflected Gaussian random walks.

    The stream is seeded by `seed` when given, otherwise by ``config.seed``.
    """
    if n_trials < 1:
        raise UsageError(f'Expected at least one trial (given {n_trials})')
    rng = np.random.default_rng(config.seed if seed is None else seed)
    lo, hi = config.p_bounds
    steps = rng.normal(0.0, config.drift_sd, size=(n_trials - 1, config.n_arms))
    table = np.empty((n_trials, config.n_arms))
    table[:] = config.p_init
    if config.drift_sd == 0:
        return EnvTrace(table, config.p_bounds)
    for trial in range(1, n_trials):
        table[trial] = reflect(table[trial - 1] + steps[trial - 1], lo, hi)
    return EnvTrace(table, config.p_bounds)


def draw_reward(trace: EnvTrace, trial: int, arm: int, rng: np.random.Generator) -> int:
    """Bernoulli reward for `arm` at `trial`."""
    if not (0 <= trial < trace.n_trials):
        raise UsageError(f'Trial {trial} out of range for trace of {trace.n_trials} trials')
    if not (0 <= arm < trace.n_arms):
        raise UsageError(f'Arm {arm} out of range for {trace.n_arms} arms')
    return int(rng.random() < trace.probabilities[trial, arm])
