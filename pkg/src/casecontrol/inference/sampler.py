# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
No-U-Turn sampler with warmup adaptation.

Each transition grows a trajectory by repeated doubling in a random time
direction and picks the next state by multinomial sampling over trajectory
points, favouring later subtrees. Doubling stops on a U-turn, checked on the
whole trajectory and across the seams of the two halves being merged, or when a
step diverges energetically.

Warmup runs as a small state machine per chain:

    START -> EARLY -> COLLECT -> FINAL -> SAMPLE -> HALT

The step size is adapted by dual averaging throughout warmup. The diagonal
metric is estimated from draws in the COLLECT window (second half of warmup
less a terminal buffer), after which the step size is re-initialized and
adaptation restarts for the FINAL window.
"""


# type annotations
from __future__ import annotations
from typing import Tuple, List, Dict, Any, Type, Optional, Callable, Sequence, Iterator, Union, Final, TYPE_CHECKING

# standard libs
import math
import time
from dataclasses import dataclass, field, replace

# external libs
import numpy as np

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.exceptions import UsageError, FitFailure, InitializationError
from casecontrol.core.fsm import State, StateMachine
from casecontrol.core.thread import Thread
from casecontrol.core.seeding import derive_seed
from casecontrol.inference.adaptation import DualAveraging, WelfordVariance, regularize_metric
from casecontrol.inference.diagnostics import split_rhat, ess_bulk
from casecontrol.inference.posterior import (ModelSpec, FitData, ParameterLayout, ConstrainedParams, log_density,
                                             constrain, init_point, init_center)
from casecontrol.stats import WAICTerms, WAICAccumulator

# used only for annotations
if TYPE_CHECKING:
    from casecontrol.sim.dataset import SyntheticDataset

# public interface
__all__ = ['SamplerConfig', 'FitResult', 'Target', 'leapfrog', 'hamiltonian', 'find_reasonable_step_size',
           'Chain', 'ChainState', 'sample_nuts', 'nuts_fit', 'pointwise_draws', 'pointwise_terms', 'POINTWISE_LEVELS',
           'DIVERGENCE_THRESHOLD', 'RHAT_LIMIT', 'DIVERGENCE_RATE_LIMIT', 'RETRY_TARGET_ACCEPT', ]

# initialize logger
log = Logger.with_name(__name__)


DIVERGENCE_THRESHOLD: Final[float] = 1000.0
RHAT_LIMIT: Final[float] = 1.05
DIVERGENCE_RATE_LIMIT: Final[float] = 0.05
RETRY_TARGET_ACCEPT: Final[float] = 0.95
POINTWISE_LEVELS: Final[Tuple[str, ...]] = ('trial', 'subject', 'none')

# log density and its gradient at a point
Target = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass(frozen=True)
class SamplerConfig:
    """
    Sampler settings.

    `n_samples` counts every iteration of a chain including the `n_warmup`
    adaptation iterations, so each chain keeps ``n_samples - n_warmup`` draws.
    `pointwise` sets the granularity of the stored log-likelihood draws.
    """

    n_chains: int = 2
    n_samples: int = 3000
    n_warmup: int = 1000
    target_accept: float = 0.8
    max_treedepth: int = 10
    seed: int = 0
    jitter: float = 0.5
    pointwise: str = 'trial'
    parallel: bool = True
    retry: bool = True

    def __post_init__(self: SamplerConfig) -> None:
        if self.n_chains < 1:
            raise UsageError(f'Need at least one chain (given {self.n_chains})')
        if not (0 <= self.n_warmup < self.n_samples):
            raise UsageError(f'Warmup ({self.n_warmup}) must be non-negative and below samples ({self.n_samples})')
        if not (0 < self.target_accept < 1):
            raise UsageError(f'Target acceptance must be in (0, 1) (given {self.target_accept})')
        if self.max_treedepth < 1:
            raise UsageError(f'Maximum tree depth must be positive (given {self.max_treedepth})')
        if self.pointwise not in POINTWISE_LEVELS:
            raise UsageError(f'Pointwise level must be one of {", ".join(POINTWISE_LEVELS)} '
                             f'(given {self.pointwise})')

    @property
    def n_draws(self: SamplerConfig) -> int:
        return self.n_samples - self.n_warmup

    def to_dict(self: SamplerConfig) -> Dict[str, Any]:
        return {'n_chains': self.n_chains, 'n_samples': self.n_samples, 'n_warmup': self.n_warmup,
                'target_accept': self.target_accept, 'max_treedepth': self.max_treedepth, 'seed': self.seed,
                'jitter': self.jitter, 'pointwise': self.pointwise, 'parallel': self.parallel,
                'retry': self.retry}

    @classmethod
    def from_dict(cls: Type[SamplerConfig], data: Dict[str, Any]) -> SamplerConfig:
        return cls(**{name: data[name] for name in cls().to_dict() if name in data})


@dataclass(frozen=True, eq=False)
class FitResult:
    """
    Post-warmup draws on the unconstrained scale with their diagnostics.

    `draws` is chains x draws x parameters. `pointwise` is chains x draws x points
    (points are subject-trials or subjects) when requested; `waic_terms` holds the
    same points reduced to their information-criterion terms. Model fits carry their
    `layout` and `model`; bare targets leave both unset.
    """

    draws: np.ndarray
    names: List[str]
    rhat: np.ndarray
    ess: np.ndarray
    divergences: np.ndarray
    accept_rate: np.ndarray
    step_size: np.ndarray
    inv_metric: np.ndarray
    treedepth_hits: np.ndarray
    warmup_divergences: np.ndarray
    config: SamplerConfig
    elapsed: float = 0.0
    pointwise: Optional[np.ndarray] = None
    waic_terms: Optional[WAICTerms] = None
    layout: Optional[ParameterLayout] = None
    model: Optional[ModelSpec] = None
    attempts: int = 1
    usable: bool = field(init=False)

    def __post_init__(self: FitResult) -> None:
        object.__setattr__(self, 'usable', self.max_rhat < RHAT_LIMIT and self.divergence_rate < DIVERGENCE_RATE_LIMIT)

    @property
    def n_chains(self: FitResult) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self: FitResult) -> int:
        return self.draws.shape[1]

    @property
    def max_rhat(self: FitResult) -> float:
        return float(np.max(self.rhat))

    @property
    def min_ess(self: FitResult) -> float:
        return float(np.min(self.ess))

    @property
    def divergence_rate(self: FitResult) -> float:
        return float(self.divergences.sum() / (self.n_chains * self.n_draws))

    def mean(self: FitResult) -> np.ndarray:
        """Posterior mean of every unconstrained coordinate."""
        return self.draws.mean(axis=(0, 1))

    def constrained(self: FitResult) -> ConstrainedParams:
        """Draws mapped to natural scales (requires a model fit)."""
        if self.layout is None:
            raise UsageError('Fit has no parameter layout')
        return constrain(self.draws, self.layout)

    @property
    def alpha_mean(self: FitResult) -> np.ndarray:
        """Posterior mean learning rate of every subject."""
        return self.constrained().alpha.mean(axis=(0, 1))

    @property
    def tau_mean(self: FitResult) -> np.ndarray:
        """Posterior mean temperature of every subject."""
        return self.constrained().tau.mean(axis=(0, 1))

    def diagnostics(self: FitResult) -> Dict[str, Any]:
        """Summary diagnostics (lists, for serialization)."""
        return {'max_rhat': self.max_rhat, 'min_ess': self.min_ess, 'rhat': self.rhat.tolist(),
                'ess': self.ess.tolist(), 'divergences': self.divergences.tolist(),
                'divergence_rate': self.divergence_rate, 'accept_rate': self.accept_rate.tolist(),
                'step_size': self.step_size.tolist(), 'treedepth_hits': self.treedepth_hits.tolist(),
                'warmup_divergences': self.warmup_divergences.tolist(), 'usable': self.usable,
                'attempts': self.attempts}


def kinetic_energy(p: np.ndarray, inv_metric: np.ndarray) -> float:
    return 0.5 * float(np.dot(p, inv_metric * p))


def hamiltonian(logp: float, p: np.ndarray, inv_metric: np.ndarray) -> float:
    """Total energy: potential (negative log density) plus kinetic."""
    return -logp + kinetic_energy(p, inv_metric)


def leapfrog(target: Target, theta: np.ndarray, p: np.ndarray, grad: np.ndarray, step_size: float,
             inv_metric: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """One leapfrog step; returns new position, momentum, log density and gradient."""
    p = p + 0.5 * step_size * grad
    theta = theta + step_size * inv_metric * p
    logp, grad = target(theta)
    p = p + 0.5 * step_size * grad
    return theta, p, logp, grad


@dataclass(frozen=True)
class Point:
    """A phase-space point along a trajectory."""
    theta: np.ndarray
    p: np.ndarray
    p_sharp: np.ndarray
    logp: float
    grad: np.ndarray


@dataclass
class Subtree:
    """Contiguous run of trajectory points; `minus` is earliest in time and `plus` latest."""
    minus: Point
    plus: Point
    proposal: Point
    log_weight: float
    rho: np.ndarray
    n_leapfrog: int = 0
    sum_accept: float = 0.0
    diverged: bool = False
    turning: bool = False


def _no_uturn(p_sharp_minus: np.ndarray, p_sharp_plus: np.ndarray, rho: np.ndarray) -> bool:
    return float(np.dot(p_sharp_minus, rho)) > 0 and float(np.dot(p_sharp_plus, rho)) > 0


def _is_turning(back: Subtree, front: Subtree) -> bool:
    """Generalized U-turn check on ``back + front`` including both seams."""
    rho = back.rho + front.rho
    return not (_no_uturn(back.minus.p_sharp, front.plus.p_sharp, rho)
                and _no_uturn(back.minus.p_sharp, front.minus.p_sharp, back.rho + front.minus.p)
                and _no_uturn(back.plus.p_sharp, front.plus.p_sharp, front.rho + back.plus.p))


@dataclass
class Transition:
    """Outcome of one sampler iteration."""
    point: Point
    accept_stat: float
    n_leapfrog: int
    depth: int
    divergent: bool
    energy: float


class Trajectory:
    """Builds one NUTS transition for a fixed step size and metric."""

    def __init__(self: Trajectory, target: Target, step_size: float, inv_metric: np.ndarray,
                 max_treedepth: int, rng: np.random.Generator) -> None:
        self.target = target
        self.step_size = step_size
        self.inv_metric = inv_metric
        self.max_treedepth = max_treedepth
        self.rng = rng

    def point(self: Trajectory, theta: np.ndarray, p: np.ndarray, logp: float, grad: np.ndarray) -> Point:
        return Point(theta, p, self.inv_metric * p, logp, grad)

    def build(self: Trajectory, start: Point, depth: int, direction: int, h0: float) -> Subtree:
        """Grow a subtree of ``2 ** depth`` steps from `start` in `direction`."""
        if depth == 0:
            theta, p, logp, grad = leapfrog(self.target, start.theta, start.p, start.grad,
                                            direction * self.step_size, self.inv_metric)
            new = self.point(theta, p, logp, grad)
            energy = hamiltonian(logp, p, self.inv_metric) if math.isfinite(logp) else math.inf
            energy = energy if math.isfinite(energy) else math.inf
            log_weight = h0 - energy
            return Subtree(minus=new, plus=new, proposal=new, log_weight=log_weight, rho=p.copy(), n_leapfrog=1,
                           sum_accept=math.exp(min(log_weight, 0.0)),
                           diverged=energy - h0 > DIVERGENCE_THRESHOLD)
        first = self.build(start, depth - 1, direction, h0)
        if first.diverged or first.turning:
            return first
        second = self.build(first.plus if direction > 0 else first.minus, depth - 1, direction, h0)
        n_leapfrog = first.n_leapfrog + second.n_leapfrog
        sum_accept = first.sum_accept + second.sum_accept
        if second.diverged or second.turning:
            return replace(first, n_leapfrog=n_leapfrog, sum_accept=sum_accept,
                           diverged=second.diverged, turning=second.turning)
        log_weight = float(np.logaddexp(first.log_weight, second.log_weight))
        proposal = first.proposal
        if math.log(self.rng.random()) < second.log_weight - log_weight:
            proposal = second.proposal
        back, front = (first, second) if direction > 0 else (second, first)
        return Subtree(minus=back.minus, plus=front.plus, proposal=proposal, log_weight=log_weight,
                       rho=back.rho + front.rho, n_leapfrog=n_leapfrog, sum_accept=sum_accept,
                       turning=_is_turning(back, front))

    def transition(self: Trajectory, theta: np.ndarray, logp: float, grad: np.ndarray) -> Transition:
        """Draw a momentum and run one full NUTS transition from `theta`."""
        p = self.rng.standard_normal(theta.size) / np.sqrt(self.inv_metric)
        start = self.point(theta, p, logp, grad)
        h0 = hamiltonian(logp, p, self.inv_metric)
        tree = Subtree(minus=start, plus=start, proposal=start, log_weight=0.0, rho=p.copy())
        proposal, n_leapfrog, sum_accept, divergent, depth = start, 0, 0.0, False, 0
        while depth < self.max_treedepth:
            direction = 1 if self.rng.random() < 0.5 else -1
            edge = tree.plus if direction > 0 else tree.minus
            new = self.build(edge, depth, direction, h0)
            n_leapfrog += new.n_leapfrog
            sum_accept += new.sum_accept
            depth += 1
            if new.diverged:
                divergent = True
                break
            if new.turning:
                break
            if math.log(self.rng.random()) < new.log_weight - tree.log_weight:
                proposal = new.proposal
            back, front = (tree, new) if direction > 0 else (new, tree)
            tree = Subtree(minus=back.minus, plus=front.plus, proposal=proposal,
                           log_weight=float(np.logaddexp(tree.log_weight, new.log_weight)),
                           rho=back.rho + front.rho)
            if _is_turning(back, front):
                break
        accept_stat = sum_accept / n_leapfrog if n_leapfrog else 0.0
        energy = hamiltonian(proposal.logp, proposal.p, self.inv_metric)
        return Transition(proposal, accept_stat, n_leapfrog, depth, divergent, energy)


def find_reasonable_step_size(target: Target, theta: np.ndarray, logp: float, grad: np.ndarray,
                              inv_metric: np.ndarray, rng: np.random.Generator, initial: float = 1.0,
                              max_iter: int = 100) -> float:
    """
    Double or halve the step size until a single leapfrog step's acceptance crosses one half.
    """
    step_size = initial
    p = rng.standard_normal(theta.size) / np.sqrt(inv_metric)
    h0 = hamiltonian(logp, p, inv_metric)

    def log_ratio(eps: float) -> float:
        _, p_new, logp_new, _ = leapfrog(target, theta, p, grad, eps, inv_metric)
        delta = h0 - hamiltonian(logp_new, p_new, inv_metric) if math.isfinite(logp_new) else -math.inf
        return delta if math.isfinite(delta) else -math.inf

    ratio = log_ratio(step_size)
    direction = 1 if ratio > math.log(0.5) else -1
    for _ in range(max_iter):
        if direction * ratio <= -direction * math.log(2):
            break
        step_size *= 2.0 ** direction
        if not (1e-10 < step_size < 1e7):
            break
        ratio = log_ratio(step_size)
    return float(min(max(step_size, 1e-10), 1e7))


class ChainState(State):
    """Finite states of a chain."""
    START = 0
    EARLY = 1
    COLLECT = 2
    FINAL = 3
    SAMPLE = 4
    HALT = 5


class Chain(StateMachine):
    """
    One Markov chain from initialization through warmup and sampling.

    Warmup windows for ``W`` warmup iterations: EARLY covers ``[0, W/2)``, COLLECT
    ``[W/2, W - b)`` and FINAL ``[W - b, W)`` with terminal buffer ``b = min(50, W // 10)``.
    """

    state: ChainState = ChainState.START
    states: Type[State] = ChainState

    def __init__(self: Chain, target: Target, init: np.ndarray, config: SamplerConfig,
                 seed: np.random.SeedSequence, chain_id: int = 0) -> None:
        self.target = target
        self.config = config
        self.chain_id = chain_id
        self.rng = np.random.default_rng(seed)
        self.theta = np.asarray(init, dtype=float).copy()
        self.dim = self.theta.size
        self.iteration = 0
        n_warmup = config.n_warmup
        buffer = min(50, n_warmup // 10)
        self.early_end = n_warmup // 2
        self.collect_end = n_warmup - buffer
        self.inv_metric = np.ones(self.dim)
        self.welford = WelfordVariance(self.dim)
        self.draws = np.zeros((config.n_draws, self.dim))
        self.divergent = np.zeros(config.n_draws, dtype=bool)
        self.accept = np.zeros(config.n_draws)
        self.depth = np.zeros(config.n_draws, dtype=np.int64)
        self.warmup_divergences = 0
        self.logp, self.grad = math.nan, np.zeros(self.dim)
        self.step_size = 1.0
        self.adapter: Optional[DualAveraging] = None
        self.actions = {
            ChainState.START: self.start,
            ChainState.EARLY: self.early,
            ChainState.COLLECT: self.collect,
            ChainState.FINAL: self.final,
            ChainState.SAMPLE: self.sample,
        }

    def start(self: Chain) -> ChainState:
        """Evaluate the initial point and pick a first step size."""
        self.logp, self.grad = self.target(self.theta)
        if not math.isfinite(self.logp):
            raise InitializationError(f'Chain {self.chain_id}: initial point has non-finite log density')
        self.step_size = find_reasonable_step_size(self.target, self.theta, self.logp, self.grad,
                                                   self.inv_metric, self.rng)
        self.adapter = DualAveraging(self.step_size, self.config.target_accept)
        log.trace(f'Chain {self.chain_id}: initial step size {self.step_size:.4g}')
        return self.phase()

    def phase(self: Chain) -> ChainState:
        """State for the upcoming iteration."""
        if self.iteration >= self.config.n_warmup:
            return ChainState.SAMPLE
        if self.iteration < self.early_end:
            return ChainState.EARLY
        if self.iteration < self.collect_end:
            return ChainState.COLLECT
        return ChainState.FINAL

    def advance(self: Chain) -> ChainState:
        """Close warmup after its last iteration, then pick the next state."""
        if self.iteration == self.config.n_warmup:
            self.end_warmup()
        return self.phase()

    def step(self: Chain) -> Transition:
        trajectory = Trajectory(self.target, self.step_size, self.inv_metric, self.config.max_treedepth, self.rng)
        result = trajectory.transition(self.theta, self.logp, self.grad)
        self.theta, self.logp, self.grad = result.point.theta, result.point.logp, result.point.grad
        return result

    def warmup_step(self: Chain) -> None:
        result = self.step()
        self.warmup_divergences += int(result.divergent)
        self.step_size = self.adapter.update(result.accept_stat)
        self.iteration += 1

    def end_warmup(self: Chain) -> None:
        if self.warmup_divergences == self.config.n_warmup:
            raise FitFailure(f'Chain {self.chain_id}: every warmup iteration diverged',
                             {'chain': self.chain_id, 'warmup_divergences': self.warmup_divergences,
                              'step_size': self.step_size})
        self.step_size = self.adapter.final_step_size
        log.debug(f'Chain {self.chain_id}: warmup done (step size {self.step_size:.4g}, '
                  f'{self.warmup_divergences} divergences)')

    def early(self: Chain) -> ChainState:
        self.warmup_step()
        return self.advance()

    def collect(self: Chain) -> ChainState:
        self.warmup_step()
        self.welford.update(self.theta)
        if self.iteration == self.collect_end:
            self.inv_metric = regularize_metric(self.welford.variance, self.welford.count)
            self.step_size = find_reasonable_step_size(self.target, self.theta, self.logp, self.grad,
                                                       self.inv_metric, self.rng, initial=self.step_size)
            self.adapter.restart(self.step_size)
            log.trace(f'Chain {self.chain_id}: metric updated from {self.welford.count} draws')
        return self.advance()

    def final(self: Chain) -> ChainState:
        self.warmup_step()
        return self.advance()

    def sample(self: Chain) -> ChainState:
        index = self.iteration - self.config.n_warmup
        result = self.step()
        self.draws[index] = self.theta
        self.divergent[index] = result.divergent
        self.accept[index] = result.accept_stat
        self.depth[index] = result.depth
        self.iteration += 1
        return ChainState.HALT if self.iteration >= self.config.n_samples else ChainState.SAMPLE


class ChainThread(Thread):
    """Run a chain to completion on its own thread."""

    def __init__(self: ChainThread, chain: Chain) -> None:
        self.chain = chain
        super().__init__(name=f'casecontrol-chain-{chain.chain_id}')

    def run_with_exceptions(self: ChainThread) -> Chain:
        self.chain.run()
        return self.chain


def sample_nuts(target: Target, inits: Sequence[np.ndarray], config: SamplerConfig,
                names: Optional[List[str]] = None,
                seeds: Optional[Sequence[np.random.SeedSequence]] = None) -> FitResult:
    """
    Run one chain per initial point and collect draws with diagnostics.

    Chain streams come from `seeds` or are spawned from ``config.seed``. Chains may run
    on threads; results are merged in chain order.
    """
    if len(inits) != config.n_chains:
        raise UsageError(f'Expected {config.n_chains} initial points (given {len(inits)})')
    seeds = seeds or derive_seed(config.seed, 'chains').spawn(config.n_chains)
    chains = [Chain(target, init, config, seed, chain_id) for chain_id, (init, seed) in enumerate(zip(inits, seeds))]
    start_time = time.time()
    if config.parallel and config.n_chains > 1:
        threads = [ChainThread.new(chain) for chain in chains]
        chains = [thread.join() for thread in threads]
    else:
        for chain in chains:
            chain.run()
    elapsed = time.time() - start_time
    draws = np.stack([chain.draws for chain in chains])
    dim = draws.shape[-1]
    result = FitResult(
        draws=draws, names=names or [f'theta[{i}]' for i in range(dim)],
        rhat=np.array([split_rhat(draws[..., i]) for i in range(dim)]),
        ess=np.array([ess_bulk(draws[..., i]) for i in range(dim)]),
        divergences=np.array([chain.divergent.sum() for chain in chains], dtype=np.int64),
        accept_rate=np.array([chain.accept.mean() for chain in chains]),
        step_size=np.array([chain.step_size for chain in chains]),
        inv_metric=np.stack([chain.inv_metric for chain in chains]),
        treedepth_hits=np.array([np.sum(chain.depth >= config.max_treedepth) for chain in chains], dtype=np.int64),
        warmup_divergences=np.array([chain.warmup_divergences for chain in chains], dtype=np.int64),
        config=config, elapsed=elapsed)
    log.debug(f'Sampled {config.n_chains} chains x {config.n_draws} draws in {elapsed:.1f}s '
              f'(max rhat {result.max_rhat:.3f}, min ess {result.min_ess:.0f}, '
              f'{int(result.divergences.sum())} divergences)')
    return result


def _model_target(spec: ModelSpec, data: FitData, layout: ParameterLayout) -> Target:
    def target(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        result = log_density(spec, data, theta, layout=layout)
        return result.log_posterior, result.gradient
    return target


def _pointwise_rows(spec: ModelSpec, data: FitData, layout: ParameterLayout, draws: np.ndarray,
                    level: str) -> Iterator[np.ndarray]:
    mask = np.arange(data.choices.shape[1]) < data.lengths[:, np.newaxis]
    for chain in range(draws.shape[0]):
        for index in range(draws.shape[1]):
            table = log_density(spec, data, draws[chain, index], pointwise=True, layout=layout).pointwise_loglik
            yield table[mask] if level == 'trial' else table.sum(axis=1)


def _n_points(data: FitData, level: str) -> int:
    return int(data.lengths.sum()) if level == 'trial' else data.n_subjects


def pointwise_draws(spec: ModelSpec, data: FitData, layout: ParameterLayout, draws: np.ndarray,
                    level: str = 'trial') -> Optional[np.ndarray]:
    """
    Log-likelihood of every data point at every draw (chains x draws x points).

    At 'trial' level the points are each subject's recorded trials in order; at
    'subject' level they are per-subject totals.
    """
    if level == 'none':
        return None
    out = np.zeros(draws.shape[:2] + (_n_points(data, level), ))
    for position, row in enumerate(_pointwise_rows(spec, data, layout, draws, level)):
        out[np.unravel_index(position, draws.shape[:2])] = row
    return out


def pointwise_terms(spec: ModelSpec, data: FitData, layout: ParameterLayout, draws: np.ndarray,
                    level: str = 'trial') -> Optional[WAICTerms]:
    """Per-point WAIC terms at `level`, accumulated draw by draw (same points as :func:`pointwise_draws`)."""
    if level == 'none':
        return None
    accumulator = WAICAccumulator(_n_points(data, level))
    for row in _pointwise_rows(spec, data, layout, draws, level):
        accumulator.add(row)
    return accumulator.terms()


def nuts_fit(spec: ModelSpec, data: Union[SyntheticDataset, FitData], cfg: SamplerConfig,
             keep_pointwise: bool = True) -> FitResult:
    """
    Fit a hierarchical model to recorded behaviour.

    A fit that fails the usability gate (max split R-hat below 1.05 and divergence rate
    below 5%) is run once more with target acceptance 0.95 when ``cfg.retry`` is set;
    the second result is returned either way, flagged by its `usable` attribute.

    Without `keep_pointwise` only the per-point WAIC terms are kept (`waic_terms`),
    so memory does not grow with the number of draws.
    """
    data = data if isinstance(data, FitData) else FitData.from_dataset(data)
    layout = ParameterLayout.for_model(spec.kind, data)
    target = _model_target(spec, data, layout)
    center = init_center(spec, data)
    attempts = 2 if cfg.retry else 1
    result = None
    for attempt in range(1, attempts + 1):
        config = cfg if attempt == 1 else replace(cfg, target_accept=max(cfg.target_accept, RETRY_TARGET_ACCEPT))
        root = derive_seed(config.seed, 'nuts', attempt)
        init_seed, chain_seed = root.spawn(2)
        inits = [init_point(spec, data, np.random.default_rng(seed), config.jitter, center)
                 for seed in init_seed.spawn(config.n_chains)]
        result = sample_nuts(target, inits, config, names=layout.names(), seeds=chain_seed.spawn(config.n_chains))
        result = replace(result, layout=layout, model=spec, attempts=attempt)
        if result.usable:
            break
        log.warning(f'Fit of {spec.kind.value} model unusable on attempt {attempt} '
                    f'(max rhat {result.max_rhat:.3f}, divergence rate {result.divergence_rate:.3f})')
    if not keep_pointwise:
        return replace(result, waic_terms=pointwise_terms(spec, data, layout, result.draws, cfg.pointwise))
    return replace(result, pointwise=pointwise_draws(spec, data, layout, result.draws, cfg.pointwise))
