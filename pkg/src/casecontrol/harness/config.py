# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Run configuration.

A run is described by the `run`, `grid`, `dataset`, `task`, `model`, `sampler`,
`window` and `metrics` sections of the configuration. Layers are merged
depth-first, lowest first:

    global configuration (defaults, system/user/local files, environment)
    named profile (--profile)
    run document (--config)
    environment overrides (CASECONTROL_RUN_OUTPUT, CASECONTROL_RUN_JOBS)
    command-line flags (--seed, --jobs, --output)

The resolved sections are written to `<output>/run.toml` so a run can be resumed
exactly.
"""


# type annotations
from __future__ import annotations
from typing import List, Dict, Any, Tuple, Union, Optional, Final

# standard libs
import os

# external libs
import toml
import tomlkit
from cmdkit.config import Namespace, Configuration, ConfigurationError

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.config import config as global_config, load_env
from casecontrol.core.exceptions import UsageError
from casecontrol.sim.agent import BetaSpec
from casecontrol.sim.bandit import RovingBanditConfig
from casecontrol.sim.dataset import (GridCell, GroupSpec, GroupLabel, DatasetConfig, build_grid, PAIRING_RULES,
                                     FULL_CONCENTRATIONS, DESK_CONCENTRATIONS)
from casecontrol.inference.posterior import ModelKind, ModelSpec, HyperPriors
from casecontrol.inference.sampler import SamplerConfig

# public interface
__all__ = ['RunConfig', 'PROFILES', 'RUN_SECTIONS', 'RUN_FILE', 'ENV_OVERRIDES', ]

# initialize logger
log = Logger.with_name(__name__)


RUN_FILE: Final[str] = 'run.toml'
RUN_SECTIONS: Final[Tuple[str, ...]] = ('run', 'grid', 'dataset', 'task', 'model', 'sampler', 'window', 'metrics')
ENV_OVERRIDES: Final[Tuple[str, ...]] = ('output', 'jobs')

_FULL_STUDY: Final[Namespace] = Namespace({
    'grid': {'concentrations': list(FULL_CONCENTRATIONS)},
    'run': {'resamples': 1000},
})

# 'full' is an alias of 'paper'
PROFILES: Final[Dict[str, Namespace]] = {
    'desk': Namespace({
        'grid': {'concentrations': list(DESK_CONCENTRATIONS)},
        'run': {'resamples': 20},
    }),
    'paper': _FULL_STUDY,
    'full': _FULL_STUDY,
}


def _load_document(filepath: str) -> Namespace:
    if not os.path.exists(filepath):
        raise ConfigurationError(f'Run configuration not found: {filepath}')
    try:
        return Namespace.from_toml(filepath)
    except Exception as error:
        raise ConfigurationError(f'(from file: {filepath}) {error.__class__.__name__}: {error}') from error


class RunConfig:
    """Validated run settings with builders for the objects each stage needs."""

    data: Namespace

    def __init__(self: RunConfig, data: Union[Namespace, Dict[str, Any]]) -> None:
        self.data = Namespace({section: Namespace(dict(data.get(section, {}))) for section in RUN_SECTIONS})
        self.validate()

    @classmethod
    def load(cls, profile: Optional[str] = None, filepath: Optional[str] = None, seed: Optional[int] = None,
             jobs: Optional[int] = None, output: Optional[str] = None,
             base: Optional[Configuration] = None) -> RunConfig:
        """Merge every configuration layer (see module documentation)."""
        base = base if base is not None else global_config
        layers = {'global': Namespace({section: base[section].to_dict() for section in RUN_SECTIONS})}
        if profile is not None:
            if profile not in PROFILES:
                raise ConfigurationError(f'Unknown profile \'{profile}\' (expected one of {", ".join(PROFILES)})')
            layers['profile'] = PROFILES[profile]
        if filepath is not None:
            layers['file'] = _load_document(filepath)
        env_run = load_env().get('run', {})
        layers['env'] = Namespace({'run': {key: env_run[key] for key in ENV_OVERRIDES if key in env_run}})
        flags = {'seed': seed, 'jobs': jobs, 'output': output}
        layers['cli'] = Namespace({'run': {key: value for key, value in flags.items() if value is not None}})
        merged = Configuration(**layers)
        run = cls({section: merged[section].to_dict() for section in RUN_SECTIONS})
        log.debug(f'Run configuration: profile={profile}, file={filepath}, seed={run.seed}, jobs={run.jobs}')
        log.trace(f'Resolved run configuration:\n{run.describe()}')
        return run

    @classmethod
    def from_file(cls, filepath: str) -> RunConfig:
        """Load a resolved run document (as written by :meth:`write`)."""
        return cls(_load_document(filepath))

    def to_dict(self: RunConfig) -> Dict[str, Any]:
        return {section: self.data[section].to_dict() for section in RUN_SECTIONS}

    def describe(self: RunConfig, *sections: str) -> str:
        """TOML text of the given sections (all of them by default)."""
        values = self.to_dict()
        return toml.dumps({section: values[section] for section in sections or RUN_SECTIONS})

    def write(self: RunConfig, filepath: str) -> None:
        """Write the resolved configuration as a TOML document."""
        document = tomlkit.document()
        document.add(tomlkit.comment('Resolved casecontrol run configuration (used by --resume)'))
        for section, values in self.to_dict().items():
            table = tomlkit.table()
            for key, value in values.items():
                table.add(key, value)
            document.add(section, table)
        with open(filepath, mode='w') as stream:
            stream.write(tomlkit.dumps(document))

    def __eq__(self: RunConfig, other: Any) -> bool:
        return isinstance(other, RunConfig) and self.to_dict() == other.to_dict()

    # ---- accessors ----

    @property
    def output(self: RunConfig) -> str:
        return str(self.data.run.output)

    @property
    def seed(self: RunConfig) -> int:
        return int(self.data.run.seed)

    @property
    def jobs(self: RunConfig) -> int:
        return int(self.data.run.jobs)

    @property
    def resamples(self: RunConfig) -> int:
        return int(self.data.run.resamples)

    @property
    def prune(self: RunConfig) -> bool:
        return bool(self.data.run.prune)

    @property
    def perturbations(self: RunConfig) -> List[Tuple[int, int]]:
        return [(int(subjects), int(trials)) for subjects, trials in self.data.run.perturbations]

    @property
    def window_selector(self: RunConfig) -> Union[str, int]:
        selector = self.data.window.selector
        return selector if isinstance(selector, str) else int(selector)

    @property
    def window_stride(self: RunConfig) -> int:
        return int(self.data.window.stride)

    def validate(self: RunConfig) -> None:
        """Raise ConfigurationError on any invalid setting."""
        run, dataset = self.data.run, self.data.dataset
        try:
            if int(run.resamples) < 1:
                raise ConfigurationError(f'run.resamples must be at least 1 (given {run.resamples})')
            if int(run.jobs) < 1:
                raise ConfigurationError(f'run.jobs must be at least 1 (given {run.jobs})')
            if not run.perturbations:
                raise ConfigurationError('run.perturbations must not be empty')
            for pair in run.perturbations:
                if len(pair) != 2:
                    raise ConfigurationError(f'Perturbation must be [subjects, trials] (given {pair})')
                subjects, trials = int(pair[0]), int(pair[1])
                if not (2 <= subjects <= int(dataset.subjects)):
                    raise ConfigurationError(f'Perturbation keeps {subjects} subjects per group '
                                             f'(must be in [2, {dataset.subjects}])')
                if not (1 <= trials <= int(dataset.trials)):
                    raise ConfigurationError(f'Perturbation keeps {trials} trials '
                                             f'(must be in [1, {dataset.trials}])')
            if self.data.grid.pairing not in PAIRING_RULES:
                raise ConfigurationError(f'Unknown grid.pairing \'{self.data.grid.pairing}\'')
            selector = self.data.window.selector
            if isinstance(selector, str) and selector not in ('first', 'best'):
                raise ConfigurationError(f'window.selector must be \'first\', \'best\' or an offset (given {selector})')
            self.grid()
            self.sampler_config()
            self.model_spec(ModelKind.SHARED)
            self.dataset_config(self.grid()[0], 0)
        except (UsageError, TypeError, ValueError, AttributeError, KeyError) as error:
            raise ConfigurationError(f'Invalid run configuration: {error}') from error

    # ---- builders ----

    def grid(self: RunConfig) -> List[GridCell]:
        grid = self.data.grid
        return build_grid([float(m) for m in grid.modes], [float(c) for c in grid.concentrations],
                          pairing_rule=grid.pairing, control_mode=float(grid.control_mode))

    def bandit_config(self: RunConfig) -> RovingBanditConfig:
        task = self.data.task
        return RovingBanditConfig(n_arms=int(task.arms), p_init=tuple(task.p_init), drift_sd=float(task.drift_sd),
                                  p_bounds=tuple(task.p_bounds), seed=self.seed)

    def dataset_config(self: RunConfig, cell: GridCell, resample_id: int) -> DatasetConfig:
        dataset = self.data.dataset
        tau = BetaSpec(float(dataset.tau_mode), float(dataset.tau_concentration))
        n_subjects = int(dataset.subjects)
        return DatasetConfig(case=GroupSpec(cell.case, tau, n_subjects, GroupLabel.CASE),
                             control=GroupSpec(cell.control, tau, n_subjects, GroupLabel.CONTROL),
                             n_trials=int(dataset.trials), env=self.bandit_config(), resample_id=resample_id,
                             seed=self.seed, n_resamples=self.resamples, tolerance=float(dataset.tolerance),
                             max_attempts=int(dataset.max_attempts), shared_trace=bool(dataset.shared_trace),
                             v0=float(self.data.task.v0), param_clamp=float(self.data.model.param_clamp))

    def model_spec(self: RunConfig, kind: Union[str, ModelKind]) -> ModelSpec:
        model = self.data.model
        priors = HyperPriors(omega_prior=BetaSpec(float(model.omega_mode), float(model.omega_concentration)),
                             kappa_loc=float(model.kappa_loc), kappa_scale=float(model.kappa_scale))
        return ModelSpec(kind=ModelKind(kind), hyperpriors=priors, v0=float(self.data.task.v0),
                         param_clamp=float(model.param_clamp))

    def sampler_config(self: RunConfig, seed: Optional[int] = None) -> SamplerConfig:
        sampler = self.data.sampler
        return SamplerConfig(n_chains=int(sampler.chains), n_samples=int(sampler.samples),
                             n_warmup=int(sampler.warmup), target_accept=float(sampler.target_accept),
                             max_treedepth=int(sampler.max_treedepth), seed=self.seed if seed is None else seed,
                             jitter=float(sampler.jitter), pointwise=str(sampler.pointwise),
                             parallel=bool(sampler.parallel))
