# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Per-subject maximum-likelihood estimates of learning rate and temperature."""


# type annotations
from __future__ import annotations
from typing import Tuple, Optional, Final

# external libs
import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.inference.kernel import replay, NO_POINTWISE

# public interface
__all__ = ['fit_subject_ml', 'fit_subjects_ml', 'LOGIT_BOUND', ]

# initialize logger
log = Logger.with_name(__name__)


LOGIT_BOUND: Final[float] = 6.0
STARTS: Final[Tuple[Tuple[float, float], ...]] = ((0.0, -1.5), (-2.0, -2.5), (2.0, -2.5))


def _negative_loglik(point: np.ndarray, choices: np.ndarray, rewards: np.ndarray, lengths: np.ndarray,
                     v0: float, n_arms: int) -> Tuple[float, np.ndarray]:
    alpha, tau = expit(point)
    loglik, d_alpha, d_tau = replay(choices, rewards, lengths, np.array([alpha]), np.array([tau]),
                                    v0, n_arms, NO_POINTWISE)
    gradient = np.array([d_alpha[0] * alpha * (1 - alpha), d_tau[0] * tau * (1 - tau)])
    return -loglik[0], -gradient


def fit_subject_ml(choices: np.ndarray, rewards: np.ndarray, n_arms: int = 2, v0: float = 0.5,
                   length: Optional[int] = None) -> Tuple[float, float]:
    """
    Maximum-likelihood (alpha, tau) for one subject's history.

    Optimizes over logit-transformed parameters bounded at ``+/- LOGIT_BOUND`` with
    L-BFGS-B from a few starting points and keeps the best.
    A subject with no trials returns the midpoint (0.5, 0.5).
    """
    choices = np.ascontiguousarray(np.atleast_2d(choices), dtype=np.int64)
    rewards = np.ascontiguousarray(np.atleast_2d(rewards), dtype=np.float64)
    lengths = np.array([choices.shape[1] if length is None else length], dtype=np.int64)
    if lengths[0] == 0:
        return 0.5, 0.5
    best_value, best_point = np.inf, np.zeros(2)
    for start in STARTS:
        result = minimize(_negative_loglik, np.array(start), jac=True, method='L-BFGS-B',
                          args=(choices, rewards, lengths, v0, n_arms),
                          bounds=[(-LOGIT_BOUND, LOGIT_BOUND)] * 2)
        if np.isfinite(result.fun) and result.fun < best_value:
            best_value, best_point = result.fun, result.x
    alpha, tau = expit(best_point)
    return float(alpha), float(tau)


def fit_subjects_ml(choices: np.ndarray, rewards: np.ndarray, n_arms: int = 2, v0: float = 0.5,
                    lengths: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Apply :func:`fit_subject_ml` to every row (subject)."""
    n_subjects = choices.shape[0]
    alpha, tau = np.empty(n_subjects), np.empty(n_subjects)
    for i in range(n_subjects):
        length = None if lengths is None else int(lengths[i])
        alpha[i], tau[i] = fit_subject_ml(choices[i], rewards[i], n_arms, v0, length)
    log.trace(f'Fit {n_subjects} subjects by maximum likelihood ({choices.shape[1]} trials)')
    return alpha, tau
