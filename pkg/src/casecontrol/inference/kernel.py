# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Compiled replay of recorded choices under the learning agent.

For each subject the recorded (choice, reward) history is replayed through the
value update and softmax choice rule, accumulating the choice log-likelihood and
its exact derivatives with respect to the learning rate and the temperature.
The learning-rate derivative follows the value sensitivities ``dV/d(alpha)``
forward in time alongside the values themselves.
"""


# type annotations
from __future__ import annotations
from typing import Tuple, Optional

# standard libs
import math

# external libs
import numpy as np
import numba as nb

# public interface
__all__ = ['replay', 'replay_arrays', 'NO_POINTWISE', ]


# Placeholder passed to `replay` when pointwise output is not wanted
NO_POINTWISE = np.zeros((0, 0))


@nb.njit(cache=True, nogil=True)
def replay(choices: np.ndarray, rewards: np.ndarray, lengths: np.ndarray,
           alpha: np.ndarray, tau: np.ndarray, v0: float, n_arms: int,
           pointwise: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Replay every subject's history (subjects x trials, padded past `lengths`).

    Writes per-trial log-probabilities into `pointwise` when it has the shape of
    `choices` (pass `NO_POINTWISE` to skip). Returns per-subject log-likelihood and
    its partial derivatives with respect to `alpha` and `tau`.
    """
    n_subjects = choices.shape[0]
    keep = pointwise.shape[0] > 0
    loglik = np.zeros(n_subjects)
    d_alpha = np.zeros(n_subjects)
    d_tau = np.zeros(n_subjects)
    values = np.empty(n_arms)
    sens = np.empty(n_arms)
    probs = np.empty(n_arms)
    for i in range(n_subjects):
        a = alpha[i]
        t = tau[i]
        for k in range(n_arms):
            values[k] = v0
            sens[k] = 0.0
        for trial in range(lengths[i]):
            c = choices[i, trial]
            top = values[0] / t
            for k in range(1, n_arms):
                top = max(top, values[k] / t)
            total = 0.0
            for k in range(n_arms):
                probs[k] = math.exp(values[k] / t - top)
                total += probs[k]
            logp = values[c] / t - top - math.log(total)
            expected = 0.0
            expected_sens = 0.0
            for k in range(n_arms):
                probs[k] /= total
                expected += probs[k] * values[k]
                expected_sens += probs[k] * sens[k]
            loglik[i] += logp
            d_alpha[i] += (sens[c] - expected_sens) / t
            d_tau[i] -= (values[c] - expected) / (t * t)
            if keep:
                pointwise[i, trial] = logp
            delta = rewards[i, trial] - values[c]
            sens[c] = (1.0 - a) * sens[c] + delta
            values[c] += a * delta
    return loglik, d_alpha, d_tau


def replay_arrays(choices: np.ndarray, rewards: np.ndarray, alpha: np.ndarray, tau: np.ndarray,
                  v0: float = 0.5, n_arms: int = 2, lengths: Optional[np.ndarray] = None,
                  pointwise: bool = False) -> Tuple[np.ndarray, np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Convenience wrapper coercing dtypes; returns pointwise values when requested."""
    choices = np.ascontiguousarray(np.atleast_2d(choices), dtype=np.int64)
    rewards = np.ascontiguousarray(np.atleast_2d(rewards), dtype=np.float64)
    if lengths is None:
        lengths = np.full(choices.shape[0], choices.shape[1], dtype=np.int64)
    out = np.zeros(choices.shape) if pointwise else NO_POINTWISE
    loglik, d_alpha, d_tau = replay(choices, rewards, np.asarray(lengths, dtype=np.int64),
                                    np.atleast_1d(np.asarray(alpha, dtype=np.float64)),
                                    np.atleast_1d(np.asarray(tau, dtype=np.float64)),
                                    float(v0), int(n_arms), out)
    return loglik, d_alpha, d_tau, (out if pointwise else None)
