# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Hierarchical model log-densities over unconstrained parameters.

Subjects have a learning rate and a temperature, each drawn from a Beta
distribution in mode/concentration form whose mode and concentration are
themselves inferred. The *shared* model pools every subject under one set of
group-level parameters; the *separate* model gives case and control subjects
their own. Hyperpriors are identical for both models.

Parameters are sampled on the real line:

    [logit(alpha_1..N), logit(tau_1..N),
     then per block: logit(omega_alpha), log(kappa_alpha - 2), logit(omega_tau), log(kappa_tau - 2)]

Block 0 is the pooled block (shared) or the case block (separate); block 1 is the
control block.
"""


# type annotations
from __future__ import annotations
from typing import Tuple, Dict, Any, Type, Optional, List, NamedTuple, Final, TYPE_CHECKING

# standard libs
import math
from enum import Enum
from dataclasses import dataclass, field

# external libs
import numpy as np
from scipy.special import expit, logit, log_expit, betaln, digamma

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.exceptions import UsageError, InitializationError
from casecontrol.sim.agent import BetaSpec, DEFAULT_V0, PARAM_CLAMP
from casecontrol.inference.kernel import replay, NO_POINTWISE
from casecontrol.inference.estimate import fit_subjects_ml

# used only for annotations
if TYPE_CHECKING:
    from casecontrol.sim.dataset import SyntheticDataset

# public interface
__all__ = ['ModelKind', 'HyperPriors', 'ModelSpec', 'ParameterLayout', 'FitData', 'ConstrainedParams',
           'LogDensityResult', 'log_density', 'constrain', 'unconstrain', 'init_point', 'init_center',
           'INIT_CLAMP', 'HYPER_PARAMS', ]

# initialize logger
log = Logger.with_name(__name__)


INIT_CLAMP: Final[Tuple[float, float]] = (0.05, 0.95)
HYPER_PARAMS: Final[Tuple[str, ...]] = ('omega_alpha', 'kappa_alpha', 'omega_tau', 'kappa_tau')
BLOCK_NAMES: Final[Dict[int, Tuple[str, ...]]] = {1: ('pooled', ), 2: ('case', 'control')}
HALF_LOG_TWO_PI: Final[float] = 0.5 * math.log(2 * math.pi)


class ModelKind(str, Enum):
    """Group structure of the prior."""
    SHARED = 'shared'
    SEPARATE = 'separate'

    @property
    def n_blocks(self: ModelKind) -> int:
        return 1 if self is ModelKind.SHARED else 2


@dataclass(frozen=True)
class HyperPriors:
    """Priors on each block's mode (Beta) and log excess concentration (Normal)."""

    omega_prior: BetaSpec = field(default_factory=lambda: BetaSpec(0.5, 2))
    kappa_loc: float = math.log(8)
    kappa_scale: float = 1.0

    def __post_init__(self: HyperPriors) -> None:
        if not self.kappa_scale > 0:
            raise UsageError(f'Concentration prior scale must be positive (given {self.kappa_scale})')

    def to_dict(self: HyperPriors) -> Dict[str, Any]:
        return {'omega_prior': self.omega_prior.to_dict(), 'kappa_loc': self.kappa_loc,
                'kappa_scale': self.kappa_scale}

    @classmethod
    def from_dict(cls: Type[HyperPriors], data: Dict[str, Any]) -> HyperPriors:
        return cls(omega_prior=BetaSpec.from_dict(data['omega_prior']), kappa_loc=float(data['kappa_loc']),
                   kappa_scale=float(data['kappa_scale']))


@dataclass(frozen=True)
class ModelSpec:
    """
    Model kind with its hyperpriors and replay settings.

    `param_clamp` records the bound the generating process clamped subject parameters
    to, so a saved fit states it next to the priors. It is the clamp to pass to
    :func:`unconstrain` when mapping true parameters onto the sampler's scale. The
    log density never reads it: the logit transform keeps every unconstrained point
    strictly inside the unit interval.
    """

    kind: ModelKind
    hyperpriors: HyperPriors = field(default_factory=HyperPriors)
    v0: float = DEFAULT_V0
    param_clamp: float = PARAM_CLAMP

    def __post_init__(self: ModelSpec) -> None:
        object.__setattr__(self, 'kind', ModelKind(self.kind))
        if not (0 < self.param_clamp < 0.5):
            raise UsageError(f'Parameter clamp must be in (0, 0.5) (given {self.param_clamp})')

    def to_dict(self: ModelSpec) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'hyperpriors': self.hyperpriors.to_dict(),
                'v0': self.v0, 'param_clamp': self.param_clamp}

    @classmethod
    def from_dict(cls: Type[ModelSpec], data: Dict[str, Any]) -> ModelSpec:
        return cls(kind=ModelKind(data['kind']), hyperpriors=HyperPriors.from_dict(data['hyperpriors']),
                   v0=float(data['v0']), param_clamp=float(data['param_clamp']))


@dataclass(frozen=True, eq=False)
class FitData:
    """Recorded behaviour in the dtypes the likelihood kernel expects."""

    choices: np.ndarray
    rewards: np.ndarray
    lengths: np.ndarray
    is_case: np.ndarray
    n_arms: int = 2
    v0: float = DEFAULT_V0

    def __post_init__(self: FitData) -> None:
        object.__setattr__(self, 'choices', np.ascontiguousarray(self.choices, dtype=np.int64))
        object.__setattr__(self, 'rewards', np.ascontiguousarray(self.rewards, dtype=np.float64))
        object.__setattr__(self, 'lengths', np.ascontiguousarray(self.lengths, dtype=np.int64))
        object.__setattr__(self, 'is_case', np.asarray(self.is_case, dtype=bool))
        n_subjects = self.choices.shape[0]
        if n_subjects < 1:
            raise UsageError('Cannot fit an empty dataset')
        if self.rewards.shape != self.choices.shape:
            raise UsageError(f'Choices {self.choices.shape} and rewards {self.rewards.shape} differ in shape')
        if self.lengths.shape != (n_subjects, ) or self.is_case.shape != (n_subjects, ):
            raise UsageError('Expected one length and one group label per subject')
        if np.any(self.lengths < 0) or np.any(self.lengths > self.choices.shape[1]):
            raise UsageError('Subject history lengths out of range')

    @property
    def n_subjects(self: FitData) -> int:
        return self.choices.shape[0]

    @classmethod
    def from_arrays(cls: Type[FitData], choices: np.ndarray, rewards: np.ndarray, is_case: np.ndarray,
                    n_arms: int = 2, v0: float = DEFAULT_V0, lengths: Optional[np.ndarray] = None) -> FitData:
        choices = np.atleast_2d(choices)
        if lengths is None:
            lengths = np.full(choices.shape[0], choices.shape[1])
        return cls(choices, rewards, lengths, is_case, n_arms, v0)

    @classmethod
    def from_dataset(cls: Type[FitData], dataset: SyntheticDataset) -> FitData:
        return cls.from_arrays(dataset.choices, dataset.rewards, dataset.is_case,
                               n_arms=dataset.n_arms, v0=dataset.config.v0)


@dataclass(frozen=True, eq=False)
class ParameterLayout:
    """Positions of subject and block parameters within the unconstrained vector."""

    n_subjects: int
    n_blocks: int
    block_of_subject: np.ndarray

    def __post_init__(self: ParameterLayout) -> None:
        blocks = np.asarray(self.block_of_subject, dtype=np.int64)
        if blocks.shape != (self.n_subjects, ) or np.any(blocks < 0) or np.any(blocks >= self.n_blocks):
            raise UsageError('Every subject needs a valid prior block')
        object.__setattr__(self, 'block_of_subject', blocks)

    @classmethod
    def for_model(cls: Type[ParameterLayout], kind: ModelKind, data: FitData) -> ParameterLayout:
        if ModelKind(kind) is ModelKind.SHARED:
            return cls(data.n_subjects, 1, np.zeros(data.n_subjects, dtype=np.int64))
        if data.is_case.all() or not data.is_case.any():
            raise UsageError('Separate priors need subjects in both groups')
        return cls(data.n_subjects, 2, np.where(data.is_case, 0, 1))

    @property
    def dim(self: ParameterLayout) -> int:
        return 2 * self.n_subjects + 4 * self.n_blocks

    def names(self: ParameterLayout) -> List[str]:
        """Label of every coordinate."""
        blocks = BLOCK_NAMES[self.n_blocks]
        return ([f'alpha[{i}]' for i in range(self.n_subjects)] + [f'tau[{i}]' for i in range(self.n_subjects)]
                + [f'{name}[{block}]' for block in blocks for name in HYPER_PARAMS])

    def split(self: ParameterLayout, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Subject learning rates, subject temperatures, and blocks x 4 hyperparameters (leading axes kept)."""
        n = self.n_subjects
        hyper = theta[..., 2 * n:].reshape(theta.shape[:-1] + (self.n_blocks, 4))
        return theta[..., :n], theta[..., n:2 * n], hyper

    def block_alpha(self: ParameterLayout, theta: np.ndarray, block: int) -> Tuple[np.ndarray, np.ndarray]:
        """Constrained (omega, kappa) of the learning-rate prior of `block`."""
        _, _, hyper = self.split(theta)
        return expit(hyper[..., block, 0]), np.exp(hyper[..., block, 1]) + 2

    def block_tau(self: ParameterLayout, theta: np.ndarray, block: int) -> Tuple[np.ndarray, np.ndarray]:
        """Constrained (omega, kappa) of the temperature prior of `block`."""
        _, _, hyper = self.split(theta)
        return expit(hyper[..., block, 2]), np.exp(hyper[..., block, 3]) + 2


@dataclass(frozen=True, eq=False)
class ConstrainedParams:
    """Parameters on their natural scales (one entry per subject or per block)."""

    alpha: np.ndarray
    tau: np.ndarray
    omega_alpha: np.ndarray
    kappa_alpha: np.ndarray
    omega_tau: np.ndarray
    kappa_tau: np.ndarray


def constrain(theta: np.ndarray, layout: ParameterLayout) -> ConstrainedParams:
    """Map an unconstrained vector (or array of vectors) to natural scales."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != layout.dim:
        raise UsageError(f'Expected {layout.dim} parameters (given {theta.shape[-1]})')
    s, t, hyper = layout.split(theta)
    return ConstrainedParams(alpha=expit(s), tau=expit(t),
                             omega_alpha=expit(hyper[..., 0]), kappa_alpha=np.exp(hyper[..., 1]) + 2,
                             omega_tau=expit(hyper[..., 2]), kappa_tau=np.exp(hyper[..., 3]) + 2)


def unconstrain(params: ConstrainedParams, layout: ParameterLayout, clamp: float = 0.0) -> np.ndarray:
    """Inverse of :func:`constrain`; unit-interval values are first clipped to ``[clamp, 1 - clamp]``."""
    def _logit(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return logit(np.clip(x, clamp, 1 - clamp)) if clamp > 0 else logit(x)
    hyper = np.column_stack([_logit(params.omega_alpha), np.log(np.asarray(params.kappa_alpha) - 2),
                             _logit(params.omega_tau), np.log(np.asarray(params.kappa_tau) - 2)])
    theta = np.concatenate([_logit(params.alpha), _logit(params.tau), hyper.ravel()])
    if theta.size != layout.dim:
        raise UsageError(f'Expected {layout.dim} parameters (given {theta.size})')
    return theta


class LogDensityResult(NamedTuple):
    """
    Log posterior (up to a constant) with its gradient.

    `pointwise_loglik` holds per subject-trial log choice probabilities when they
    were requested (padding past a subject's history is zero). `finite` is false
    when any intermediate was non-finite, in which case the density is -inf and
    the gradient is zero.
    """
    log_posterior: float
    gradient: np.ndarray
    pointwise_loglik: Optional[np.ndarray]
    finite: bool


def _subject_prior(x: np.ndarray, w: np.ndarray, u: np.ndarray, blocks: np.ndarray,
                   n_blocks: int) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """
    Beta prior on expit(x) with the logit Jacobian folded in.

    With ``a = omega * exp(u) + 1`` and ``b = (1 - omega) * exp(u) + 1`` each term is
    ``a log(p) + b log(1 - p) - betaln(a, b)`` with ``p = expit(x)``.
    """
    omega, excess = expit(w), np.exp(u)
    a_block, b_block = omega * excess + 1, (1 - omega) * excess + 1
    a, b = a_block[blocks], b_block[blocks]
    log_p, log_q, p = log_expit(x), log_expit(-x), expit(x)
    value = float(np.sum(a * log_p + b * log_q - betaln(a, b)))
    grad_x = a * (1 - p) - b * p
    psi_ab = digamma(a + b)
    grad_a = np.bincount(blocks, weights=log_p - digamma(a) + psi_ab, minlength=n_blocks)
    grad_b = np.bincount(blocks, weights=log_q - digamma(b) + psi_ab, minlength=n_blocks)
    grad_w = excess * omega * (1 - omega) * (grad_a - grad_b)
    grad_u = excess * (omega * grad_a + (1 - omega) * grad_b)
    return value, grad_x, grad_w, grad_u


def _hyper_prior(w: np.ndarray, u: np.ndarray, priors: HyperPriors) -> Tuple[float, np.ndarray, np.ndarray]:
    a0, b0 = priors.omega_prior.shapes
    omega = expit(w)
    value = float(np.sum(a0 * log_expit(w) + b0 * log_expit(-w) - betaln(a0, b0)))
    z = (u - priors.kappa_loc) / priors.kappa_scale
    value += float(np.sum(-0.5 * z ** 2 - math.log(priors.kappa_scale) - HALF_LOG_TWO_PI))
    return value, a0 * (1 - omega) - b0 * omega, -z / priors.kappa_scale


def log_density(spec: ModelSpec, data: FitData, theta: np.ndarray, pointwise: bool = False,
                layout: Optional[ParameterLayout] = None) -> LogDensityResult:
    """
    Unnormalized log posterior of `theta` with its exact gradient.

    Sums the replayed choice log-likelihood of every subject, the Beta priors on
    subject parameters under their block's hyperparameters, the hyperpriors, and
    the log-Jacobians of all transforms.
    """
    layout = layout or ParameterLayout.for_model(spec.kind, data)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (layout.dim, ):
        raise UsageError(f'Expected {layout.dim} parameters (given shape {theta.shape})')
    n, blocks = layout.n_subjects, layout.block_of_subject
    s, t, hyper = layout.split(theta)
    buffer = np.zeros(data.choices.shape) if pointwise else NO_POINTWISE
    with np.errstate(all='ignore'):
        alpha, tau = expit(s), expit(t)
        loglik, d_alpha, d_tau = replay(data.choices, data.rewards, data.lengths, alpha, tau,
                                        data.v0, data.n_arms, buffer)
        gradient = np.zeros(layout.dim)
        grad_hyper = np.zeros((layout.n_blocks, 4))
        value = float(loglik.sum())
        gradient[:n] = d_alpha * alpha * (1 - alpha)
        gradient[n:2 * n] = d_tau * tau * (1 - tau)
        for offset, x, slot in ((0, s, slice(0, n)), (2, t, slice(n, 2 * n))):
            prior, grad_x, grad_w, grad_u = _subject_prior(x, hyper[:, offset], hyper[:, offset + 1],
                                                           blocks, layout.n_blocks)
            hyper_value, hyper_w, hyper_u = _hyper_prior(hyper[:, offset], hyper[:, offset + 1],
                                                         spec.hyperpriors)
            value += prior + hyper_value
            gradient[slot] += grad_x
            grad_hyper[:, offset] = grad_w + hyper_w
            grad_hyper[:, offset + 1] = grad_u + hyper_u
        gradient[2 * n:] = grad_hyper.ravel()
    points = buffer if pointwise else None
    if not (math.isfinite(value) and np.all(np.isfinite(gradient))):
        log.trace('Non-finite log density')
        return LogDensityResult(-math.inf, np.zeros(layout.dim), points, False)
    return LogDensityResult(value, gradient, points, True)


def init_point(spec: ModelSpec, data: FitData, rng: np.random.Generator, jitter: float = 0.5,
               center: Optional[np.ndarray] = None, max_tries: int = 100) -> np.ndarray:
    """
    Starting point near the per-subject maximum-likelihood estimates.

    Subject parameters start at the logit of their ML estimates clipped to
    ``INIT_CLAMP``; block parameters start at mode 0.5 and concentration 3. Uniform
    noise in ``[-jitter, jitter]`` is added to every coordinate until the density is
    finite. A precomputed unjittered `center` skips the ML fits.
    """
    if not jitter >= 0:
        raise UsageError(f'Jitter must be non-negative (given {jitter})')
    layout = ParameterLayout.for_model(spec.kind, data)
    if center is None:
        center = init_center(spec, data)
    for attempt in range(1, max_tries + 1):
        theta = center + rng.uniform(-jitter, jitter, size=layout.dim) if jitter > 0 else center.copy()
        if log_density(spec, data, theta, layout=layout).finite:
            return theta
        log.debug(f'Initial point {attempt} has non-finite density')
    raise InitializationError(f'No finite initial point after {max_tries} tries')


def init_center(spec: ModelSpec, data: FitData) -> np.ndarray:
    """Unjittered starting point (see :func:`init_point`)."""
    layout = ParameterLayout.for_model(spec.kind, data)
    alpha, tau = fit_subjects_ml(data.choices, data.rewards, data.n_arms, data.v0, data.lengths)
    lo, hi = INIT_CLAMP
    return np.concatenate([logit(np.clip(alpha, lo, hi)), logit(np.clip(tau, lo, hi)),
                           np.zeros(4 * layout.n_blocks)])
