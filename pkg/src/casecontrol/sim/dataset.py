# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Synthetic case-control datasets.

Builds the grid of group-level generating distributions, draws fidelity-checked
subject parameters, simulates every subject on the roving bandit, and derives the
reduced datasets (fewer subjects, shorter trial windows) used to test recovery
under poorer data.
"""


# type annotations
from __future__ import annotations
from typing import Tuple, List, Dict, Any, Type, Optional, Sequence, Callable, Union, NamedTuple, Iterator, Final

# standard libs
import json
from enum import Enum
from dataclasses import dataclass, field

# external libs
import numpy as np

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.exceptions import UsageError, RejectionFailure
from casecontrol.core.seeding import stable_hash, derive_seed
from casecontrol.sim.agent import BetaSpec, SubjectParams, simulate_subject, DEFAULT_V0, PARAM_CLAMP
from casecontrol.sim.bandit import RovingBanditConfig, EnvTrace, generate_trace
from casecontrol.inference.estimate import fit_subjects_ml
from casecontrol.stats import cohens_d, pearson_rho

# public interface
__all__ = ['GroupLabel', 'GroupSpec', 'DatasetConfig', 'SyntheticDataset', 'GridCell',
           'build_grid', 'sample_group_params', 'generate_dataset', 'perturb', 'select_best_window',
           'PAIRING_RULES', 'DEFAULT_CASE_MODES', 'FULL_CONCENTRATIONS', 'DESK_CONCENTRATIONS',
           'DATASET_FORMAT', 'DATASET_VERSION', ]

# initialize logger
log = Logger.with_name(__name__)


DEFAULT_CONTROL_MODE: Final[float] = 0.3
DEFAULT_CASE_MODES: Final[Tuple[float, ...]] = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
FULL_CONCENTRATIONS: Final[Tuple[float, ...]] = (2, 2.5, 3, 5, 10, 30)
DESK_CONCENTRATIONS: Final[Tuple[float, ...]] = (3, 30)

DATASET_FORMAT: Final[str] = 'casecontrol-dataset'
DATASET_VERSION: Final[int] = 1


class GroupLabel(str, Enum):
    """Diagnostic group of a subject."""
    CASE = 'case'
    CONTROL = 'control'


@dataclass(frozen=True)
class GroupSpec:
    """Generating distributions and size of one group."""

    alpha_spec: BetaSpec
    tau_spec: BetaSpec
    n_subjects: int
    label: GroupLabel

    def __post_init__(self: GroupSpec) -> None:
        object.__setattr__(self, 'label', GroupLabel(self.label))
        if self.n_subjects < 2:
            raise UsageError(f'Group needs at least two subjects (given {self.n_subjects})')

    def to_dict(self: GroupSpec) -> Dict[str, Any]:
        return {'alpha_spec': self.alpha_spec.to_dict(), 'tau_spec': self.tau_spec.to_dict(),
                'n_subjects': self.n_subjects, 'label': self.label.value}

    @classmethod
    def from_dict(cls: Type[GroupSpec], data: Dict[str, Any]) -> GroupSpec:
        return cls(alpha_spec=BetaSpec.from_dict(data['alpha_spec']), tau_spec=BetaSpec.from_dict(data['tau_spec']),
                   n_subjects=int(data['n_subjects']), label=GroupLabel(data['label']))


@dataclass(frozen=True)
class DatasetConfig:
    """Everything needed to regenerate one synthetic dataset bit for bit."""

    case: GroupSpec
    control: GroupSpec
    n_trials: int
    env: RovingBanditConfig = field(default_factory=RovingBanditConfig)
    resample_id: int = 0
    seed: int = 0
    n_resamples: int = 1
    tolerance: float = 0.02
    max_attempts: int = 10_000
    shared_trace: bool = True
    v0: float = DEFAULT_V0
    param_clamp: float = PARAM_CLAMP

    def __post_init__(self: DatasetConfig) -> None:
        if self.case.label is not GroupLabel.CASE or self.control.label is not GroupLabel.CONTROL:
            raise UsageError('DatasetConfig expects a case group and a control group')
        if self.n_trials < 1:
            raise UsageError(f'Expected at least one trial (given {self.n_trials})')
        if not (0 <= self.resample_id < self.n_resamples):
            raise UsageError(f'Resample id {self.resample_id} outside [0, {self.n_resamples})')
        if not self.tolerance > 0:
            raise UsageError(f'Fidelity tolerance must be positive (given {self.tolerance})')

    def to_dict(self: DatasetConfig) -> Dict[str, Any]:
        return {'case': self.case.to_dict(), 'control': self.control.to_dict(), 'n_trials': self.n_trials,
                'env': self.env.to_dict(), 'resample_id': self.resample_id, 'seed': self.seed,
                'n_resamples': self.n_resamples, 'tolerance': self.tolerance, 'max_attempts': self.max_attempts,
                'shared_trace': self.shared_trace, 'v0': self.v0, 'param_clamp': self.param_clamp}

    @classmethod
    def from_dict(cls: Type[DatasetConfig], data: Dict[str, Any]) -> DatasetConfig:
        return cls(case=GroupSpec.from_dict(data['case']), control=GroupSpec.from_dict(data['control']),
                   n_trials=int(data['n_trials']), env=RovingBanditConfig.from_dict(data['env']),
                   resample_id=int(data['resample_id']), seed=int(data['seed']),
                   n_resamples=int(data['n_resamples']), tolerance=float(data['tolerance']),
                   max_attempts=int(data['max_attempts']), shared_trace=bool(data['shared_trace']),
                   v0=float(data['v0']), param_clamp=float(data['param_clamp']))

    def key(self: DatasetConfig) -> int:
        """Stable hash of the generating configuration (excludes seed and resample id)."""
        data = self.to_dict()
        for name in ('seed', 'resample_id', 'n_resamples'):
            data.pop(name)
        return stable_hash(data)


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    """
    Per-subject true parameters with recorded choices and rewards.

    Rows of `choices` and `rewards` list case subjects first, then controls.
    `window_start` is the offset of the retained trial window into the
    originally simulated history.
    """

    config: DatasetConfig
    case_params: Tuple[SubjectParams, ...]
    control_params: Tuple[SubjectParams, ...]
    choices: np.ndarray
    rewards: np.ndarray
    env_trace: EnvTrace
    subject_traces: Optional[Tuple[EnvTrace, ...]] = None
    window_start: int = 0
    true_d: float = field(init=False)

    def __post_init__(self: SyntheticDataset) -> None:
        object.__setattr__(self, 'case_params', tuple(self.case_params))
        object.__setattr__(self, 'control_params', tuple(self.control_params))
        for name in ('choices', 'rewards'):
            table = np.array(getattr(self, name), dtype=np.int64)
            table.setflags(write=False)
            object.__setattr__(self, name, table)
        expected = (self.n_subjects, self.env_trace.n_trials)
        if self.choices.shape != expected or self.rewards.shape != expected:
            raise UsageError(f'Expected choices and rewards of shape {expected} '
                             f'(given {self.choices.shape} and {self.rewards.shape})')
        if self.subject_traces is not None and len(self.subject_traces) != self.n_subjects:
            raise UsageError('Expected one environment trace per subject')
        object.__setattr__(self, 'true_d', self.compute_true_d())

    def compute_true_d(self: SyntheticDataset) -> float:
        """Cohen's d of true learning rates, case minus control."""
        alpha = self.true_alpha
        return cohens_d(alpha[self.is_case], alpha[~self.is_case])

    @property
    def n_case(self: SyntheticDataset) -> int:
        return len(self.case_params)

    @property
    def n_control(self: SyntheticDataset) -> int:
        return len(self.control_params)

    @property
    def n_subjects(self: SyntheticDataset) -> int:
        return self.n_case + self.n_control

    @property
    def n_trials(self: SyntheticDataset) -> int:
        return self.env_trace.n_trials

    @property
    def n_arms(self: SyntheticDataset) -> int:
        return self.env_trace.n_arms

    @property
    def params(self: SyntheticDataset) -> Tuple[SubjectParams, ...]:
        return self.case_params + self.control_params

    @property
    def true_alpha(self: SyntheticDataset) -> np.ndarray:
        return np.array([p.learning_rate for p in self.params])

    @property
    def true_tau(self: SyntheticDataset) -> np.ndarray:
        return np.array([p.temperature for p in self.params])

    @property
    def is_case(self: SyntheticDataset) -> np.ndarray:
        return np.arange(self.n_subjects) < self.n_case

    def __eq__(self: SyntheticDataset, other: Any) -> bool:
        return (isinstance(other, SyntheticDataset) and self.config == other.config
                and self.params == other.params and self.window_start == other.window_start
                and np.array_equal(self.choices, other.choices) and np.array_equal(self.rewards, other.rewards)
                and self.env_trace == other.env_trace and self.subject_traces == other.subject_traces)

    def records(self: SyntheticDataset) -> Iterator[Dict[str, Any]]:
        """Header record followed by one record per subject."""
        yield {'format': DATASET_FORMAT, 'version': DATASET_VERSION, 'config': self.config.to_dict(),
               'window_start': self.window_start, 'n_case': self.n_case, 'n_control': self.n_control,
               'n_trials': self.n_trials, 'true_d': self.true_d,
               'env_trace': self.env_trace.probabilities.tolist()}
        for index, params in enumerate(self.params):
            group = GroupLabel.CASE if index < self.n_case else GroupLabel.CONTROL
            record = {'group': group.value, 'subject_id': index if index < self.n_case else index - self.n_case,
                      'true_alpha': params.learning_rate, 'true_tau': params.temperature,
                      'choices': self.choices[index].tolist(), 'rewards': self.rewards[index].tolist()}
            if self.subject_traces is not None:
                record['env_trace'] = self.subject_traces[index].probabilities.tolist()
            yield record

    def save(self: SyntheticDataset, filepath: str) -> None:
        """Write as JSON lines (header first)."""
        with open(filepath, mode='w') as stream:
            for record in self.records():
                stream.write(json.dumps(record) + '\n')

    @classmethod
    def load(cls: Type[SyntheticDataset], filepath: str) -> SyntheticDataset:
        """Read a dataset written by :meth:`save`."""
        with open(filepath, mode='r') as stream:
            header, *subjects = [json.loads(line) for line in stream if line.strip()]
        if header.get('format') != DATASET_FORMAT:
            raise UsageError(f'Not a dataset file: {filepath}')
        if header.get('version') != DATASET_VERSION:
            raise UsageError(f'Unsupported dataset version {header.get("version")} ({filepath})')
        config = DatasetConfig.from_dict(header['config'])
        bounds = config.env.p_bounds
        params = [SubjectParams(r['true_alpha'], r['true_tau']) for r in subjects]
        n_case = int(header['n_case'])
        traces = None
        if subjects and 'env_trace' in subjects[0]:
            traces = tuple(EnvTrace(np.array(r['env_trace']), bounds) for r in subjects)
        return cls(config=config, case_params=tuple(params[:n_case]), control_params=tuple(params[n_case:]),
                   choices=np.array([r['choices'] for r in subjects], dtype=np.int64),
                   rewards=np.array([r['rewards'] for r in subjects], dtype=np.int64),
                   env_trace=EnvTrace(np.array(header['env_trace']), bounds),
                   subject_traces=traces, window_start=int(header['window_start']))


class GridCell(NamedTuple):
    """Case and control learning-rate distributions of one grid configuration."""
    case: BetaSpec
    control: BetaSpec


PairingRule = Callable[[Sequence[float], float], List[Tuple[float, float]]]


def reference_pairs(modes: Sequence[float], control_mode: float) -> List[Tuple[float, float]]:
    """Every case mode against the fixed control mode."""
    return [(mode, control_mode) for mode in modes]


def product_pairs(modes: Sequence[float], control_mode: float) -> List[Tuple[float, float]]:
    """Every ordered (case, control) combination of modes."""
    return [(case, control) for case in modes for control in modes]


PAIRING_RULES: Final[Dict[str, PairingRule]] = {
    'reference': reference_pairs,
    'product': product_pairs,
}


def build_grid(mode_values: Sequence[float], concentrations: Sequence[float],
               pairing_rule: Union[str, PairingRule] = 'reference',
               control_mode: float = DEFAULT_CONTROL_MODE) -> List[GridCell]:
    """
    Cross mode pairs with concentrations (both groups share a concentration).

    The default 'reference' rule fixes the control mode and varies the case mode,
    so the default modes and six concentrations give 36 configurations.
    Concentration varies slowest in the returned order.
    """
    if not mode_values or not concentrations:
        raise UsageError('Grid requires at least one mode value and one concentration')
    if isinstance(pairing_rule, str):
        try:
            pairing_rule = PAIRING_RULES[pairing_rule]
        except KeyError as error:
            raise UsageError(f'Unknown pairing rule \'{pairing_rule}\' '
                             f'(expected one of {", ".join(PAIRING_RULES)})') from error
    pairs = pairing_rule(list(mode_values), control_mode)
    return [GridCell(case=BetaSpec(case, kappa), control=BetaSpec(control, kappa))
            for kappa in concentrations for case, control in pairs]


def sample_group_params(spec: GroupSpec, tolerance: float, max_attempts: int, rng: np.random.Generator,
                        clamp: float = PARAM_CLAMP) -> List[SubjectParams]:
    """
    Draw learning rates by rejection until the sample matches the generating Beta.

    A draw of ``spec.n_subjects`` learning rates (clamped to ``[clamp, 1 - clamp]``) is
    accepted when both its mean and its SD (ddof=1) are within `tolerance` of the
    theoretical values. Temperatures are drawn once afterwards without the check.
    """
    if not tolerance > 0:
        raise UsageError(f'Tolerance must be positive (given {tolerance})')
    target_mean, target_sd = spec.alpha_spec.mean, spec.alpha_spec.sd
    best_mean_error = best_sd_error = np.inf
    for attempt in range(1, max_attempts + 1):
        alpha = np.clip(spec.alpha_spec.sample(rng, spec.n_subjects), clamp, 1 - clamp)
        mean_error = abs(alpha.mean() - target_mean)
        sd_error = abs(alpha.std(ddof=1) - target_sd)
        if mean_error <= tolerance and sd_error <= tolerance:
            log.trace(f'Accepted {spec.label.value} sample after {attempt} attempts')
            break
        if max(mean_error, sd_error) < max(best_mean_error, best_sd_error):
            best_mean_error, best_sd_error = mean_error, sd_error
    else:
        raise RejectionFailure(max_attempts, best_mean_error, best_sd_error, tolerance)
    tau = spec.tau_spec.sample(rng, spec.n_subjects)
    return [SubjectParams.clamped(a, t, clamp) for a, t in zip(alpha, tau)]


def generate_dataset(config: DatasetConfig) -> SyntheticDataset:
    """
    Sample both groups, one environment trace, and every subject's behaviour.

    All randomness derives from ``(config.seed, config.key(), config.resample_id)``;
    ``config.env.seed`` is not used here.
    """
    root = derive_seed(config.seed, config.key(), config.resample_id)
    case_seed, control_seed, env_seed, behaviour_seed = root.spawn(4)
    case = sample_group_params(config.case, config.tolerance, config.max_attempts,
                               np.random.default_rng(case_seed), config.param_clamp)
    control = sample_group_params(config.control, config.tolerance, config.max_attempts,
                                  np.random.default_rng(control_seed), config.param_clamp)
    params = case + control
    trace = generate_trace(config.env, config.n_trials, seed=env_seed)
    subject_traces = None
    if not config.shared_trace:
        subject_traces = tuple(generate_trace(config.env, config.n_trials, seed=child)
                               for child in env_seed.spawn(len(params)))
    choices = np.zeros((len(params), config.n_trials), dtype=np.int64)
    rewards = np.zeros((len(params), config.n_trials), dtype=np.int64)
    for index, (subject, child) in enumerate(zip(params, behaviour_seed.spawn(len(params)))):
        subject_trace = trace if subject_traces is None else subject_traces[index]
        choices[index], rewards[index] = simulate_subject(subject, subject_trace, config.n_trials, child, config.v0)
    dataset = SyntheticDataset(config=config, case_params=tuple(case), control_params=tuple(control),
                               choices=choices, rewards=rewards, env_trace=trace, subject_traces=subject_traces)
    log.debug(f'Generated dataset {config.key():x}/r{config.resample_id} '
              f'({dataset.n_subjects} subjects, {dataset.n_trials} trials, true d = {dataset.true_d:.3f})')
    return dataset


WindowSelector = Union[str, int, Callable[[SyntheticDataset, int], int]]


def _subset(dataset: SyntheticDataset, n_subjects: int, start: int, n_trials: int) -> SyntheticDataset:
    rows = np.concatenate([np.arange(n_subjects), dataset.n_case + np.arange(n_subjects)])
    window = slice(start, start + n_trials)
    traces = None
    if dataset.subject_traces is not None:
        traces = tuple(dataset.subject_traces[row].window(start, n_trials) for row in rows)
    return SyntheticDataset(config=dataset.config,
                            case_params=dataset.case_params[:n_subjects],
                            control_params=dataset.control_params[:n_subjects],
                            choices=dataset.choices[rows, window], rewards=dataset.rewards[rows, window],
                            env_trace=dataset.env_trace.window(start, n_trials), subject_traces=traces,
                            window_start=dataset.window_start + start)


def perturb(dataset: SyntheticDataset, n_subjects: int, n_trials: int,
            window_selector: WindowSelector = 'first', stride: int = 20) -> SyntheticDataset:
    """
    Keep the first `n_subjects` of each group and a window of `n_trials` consecutive trials.

    `window_selector` is 'first', 'best' (see :func:`select_best_window`, evaluated on the
    kept subjects), a fixed start offset, or a callable ``(dataset, n_trials) -> start``.
    Histories are truncated, never re-simulated.
    """
    if not (2 <= n_subjects <= min(dataset.n_case, dataset.n_control)):
        raise UsageError(f'Cannot keep {n_subjects} subjects per group '
                         f'(dataset has {dataset.n_case} case and {dataset.n_control} control)')
    if not (1 <= n_trials <= dataset.n_trials):
        raise UsageError(f'Cannot keep {n_trials} trials (dataset has {dataset.n_trials})')
    kept = _subset(dataset, n_subjects, 0, dataset.n_trials)
    if window_selector == 'first':
        start = 0
    elif window_selector == 'best':
        start = select_best_window(kept, n_trials, stride)
    elif isinstance(window_selector, (int, np.integer)) and not isinstance(window_selector, bool):
        start = int(window_selector)
    elif callable(window_selector):
        start = int(window_selector(kept, n_trials))
    else:
        raise UsageError(f'Unknown window selector {window_selector!r}')
    if not (0 <= start <= dataset.n_trials - n_trials):
        raise UsageError(f'Window start {start} leaves fewer than {n_trials} trials')
    return _subset(kept, n_subjects, start, n_trials)


def select_best_window(dataset: SyntheticDataset, window_len: int, stride: int = 20) -> int:
    """
    Start of the trial window whose per-subject ML learning rates best track the truth.

    Candidates start every `stride` trials. Each is scored by the Pearson correlation
    between maximum-likelihood learning rates fitted on that window alone and the true
    learning rates over all subjects; an undefined correlation scores lowest.
    Ties go to the earliest window.
    """
    if not (1 <= window_len <= dataset.n_trials):
        raise UsageError(f'Window of {window_len} trials does not fit {dataset.n_trials} trials')
    if stride < 1:
        raise UsageError(f'Stride must be positive (given {stride})')
    starts = list(range(0, dataset.n_trials - window_len + 1, stride))
    if len(starts) == 1:
        return starts[0]
    truth = dataset.true_alpha
    best_start, best_score = starts[0], -np.inf
    for start in starts:
        window = slice(start, start + window_len)
        estimates, _ = fit_subjects_ml(dataset.choices[:, window], dataset.rewards[:, window],
                                       dataset.n_arms, dataset.config.v0)
        score = pearson_rho(estimates, truth)
        score = -np.inf if np.isnan(score) else score
        log.trace(f'Window {start}:{start + window_len} recovery rho = {score:.3f}')
        if score > best_score:
            best_start, best_score = start, score
    log.debug(f'Selected window {best_start}:{best_start + window_len} (rho = {best_score:.3f})')
    return best_start
