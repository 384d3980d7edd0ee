# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Expand a run configuration into its job graph.

For each grid cell and resample there is one generation job. Each perturbation
of that dataset gets a perturb job, one fit job per model, and a metrics job
that compares the two fits. A single summarize job collects every metrics job and
a final report job renders the tables.

Example:
    >>> from casecontrol.harness.config import RunConfig
    >>> from casecontrol.harness.plan import plan, JobKind
    >>> jobs = plan(RunConfig.load(profile='desk'))
    >>> sum(job.kind is JobKind.FIT for job in jobs)
    1920
"""


# type annotations
from __future__ import annotations
from typing import List, Dict, Any, Tuple, Final

# standard libs
from enum import Enum
from dataclasses import dataclass, field

# external libs
from cmdkit.config import ConfigurationError

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.inference.posterior import ModelKind
from casecontrol.harness.config import RunConfig

# public interface
__all__ = ['JobKind', 'JobSpec', 'plan', 'cell_label', 'resample_label', 'perturbation_label', 'MODELS', ]

# initialize logger
log = Logger.with_name(__name__)


MODELS: Final[Tuple[ModelKind, ...]] = (ModelKind.SHARED, ModelKind.SEPARATE)


class JobKind(str, Enum):
    """Stages of the study pipeline."""
    GENERATE = 'generate'
    PERTURB = 'perturb'
    FIT = 'fit'
    METRICS = 'metrics'
    SUMMARIZE = 'summarize'
    REPORT = 'report'

    @property
    def tolerant(self: JobKind) -> bool:
        """Whether the job still runs when some dependencies failed (and reports the gaps)."""
        return self is JobKind.SUMMARIZE


@dataclass(frozen=True)
class JobSpec:
    """A planned job: unique id, stage, stage arguments and the ids it waits on."""

    id: str
    kind: JobKind
    keys: Dict[str, Any] = field(default_factory=dict)
    depends: Tuple[str, ...] = ()

    def to_dict(self: JobSpec) -> Dict[str, Any]:
        return {'id': self.id, 'kind': self.kind.value, 'keys': dict(self.keys), 'depends': list(self.depends)}


def cell_label(cell: int) -> str:
    return f'c{cell:02d}'


def resample_label(resample: int) -> str:
    return f'r{resample:04d}'


def perturbation_label(subjects: int, trials: int) -> str:
    return f's{subjects}t{trials}'


def plan(config: RunConfig) -> List[JobSpec]:
    """
    Every job of the run in a fixed order that respects dependencies.

    The number of fit jobs is ``cells * resamples * perturbations * 2``.
    """
    perturbations = config.perturbations
    if not perturbations:
        raise ConfigurationError('Cannot plan a run without perturbations')
    grid = config.grid()
    jobs: List[JobSpec] = []
    metrics: List[str] = []
    for cell in range(len(grid)):
        for resample in range(config.resamples):
            stem = f'{cell_label(cell)}-{resample_label(resample)}'
            generate_id = f'{JobKind.GENERATE.value}/{stem}'
            jobs.append(JobSpec(generate_id, JobKind.GENERATE, {'cell': cell, 'resample': resample}))
            for subjects, trials in perturbations:
                condition = f'{stem}-{perturbation_label(subjects, trials)}'
                keys = {'cell': cell, 'resample': resample, 'subjects': subjects, 'trials': trials}
                perturb_id = f'{JobKind.PERTURB.value}/{condition}'
                jobs.append(JobSpec(perturb_id, JobKind.PERTURB, keys, (generate_id, )))
                fit_ids = []
                for model in MODELS:
                    fit_ids.append(f'{JobKind.FIT.value}/{condition}-{model.value}')
                    jobs.append(JobSpec(fit_ids[-1], JobKind.FIT, {**keys, 'model': model.value}, (perturb_id, )))
                metrics.append(f'{JobKind.METRICS.value}/{condition}')
                jobs.append(JobSpec(metrics[-1], JobKind.METRICS, keys, tuple(fit_ids)))
    jobs.append(JobSpec(JobKind.SUMMARIZE.value, JobKind.SUMMARIZE, {}, tuple(metrics)))
    jobs.append(JobSpec(JobKind.REPORT.value, JobKind.REPORT, {}, (JobKind.SUMMARIZE.value, )))
    log.debug(f'Planned {len(jobs)} jobs ({len(grid)} cells, {config.resamples} resamples, '
              f'{len(perturbations)} perturbations)')
    return jobs
