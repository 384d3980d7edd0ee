# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Job bodies for each pipeline stage.

Every stage reads its inputs from the run directory and writes its outputs
atomically, returning the relative paths it is accountable for. Jobs share
nothing but the filesystem, so :func:`run_job` can execute in a worker process.
"""


# type annotations
from __future__ import annotations
from typing import List, Dict, Any, Callable, Optional, Union, Final

# standard libs
import os
import json

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.seeding import derive_seed, stable_hash
from casecontrol.sim.dataset import SyntheticDataset, generate_dataset, perturb
from casecontrol.inference.posterior import ModelKind
from casecontrol.inference.sampler import FitResult, nuts_fit
from casecontrol.inference.storage import (FitSummary, save_fit, load_fit, load_waic_terms, prune_fit,
                                            SIDECAR, DRAWS, POINTWISE)
from casecontrol.stats import (RecoveryReport, WAICTerms, recovery_report, aggregate, parameter_recovery,
                               compare_waic, group_mean_difference)
from casecontrol.harness.config import RunConfig
from casecontrol.harness.plan import JobKind, JobSpec, MODELS
from casecontrol.harness.tables import render_tables
from casecontrol.harness.artifacts import (dataset_path, env_trace_path, perturbed_path, fit_dir, metrics_path,
                                           results_dir, staging, write_json, write_csv, relative,
                                           RESULT_FILES)

# public interface
__all__ = ['run_job', 'STAGES', 'fit_seed', 'fit_outputs', 'RECOVERY_COLUMNS', 'AGGREGATE_COLUMNS',
           'WAIC_COLUMNS', 'SCATTER_COLUMNS', ]

# initialize logger
log = Logger.with_name(__name__)


RECOVERY_COLUMNS: Final[List[str]] = [
    'cell', 'resample', 'subjects', 'trials', 'case_mode', 'control_mode', 'concentration', 'model',
    'true_d', 'recovered_d', 'es_error_pct', 'detected', 'truth_differs', 'fit_usable',
    'alpha_rho', 'tau_rho', 'attempts',
]

AGGREGATE_COLUMNS: Final[List[str]] = [
    'model', 'subjects', 'trials', 'fpr_pct', 'fpr_ci', 'fnr_pct', 'fnr_ci', 'f1_pct', 'f1_ci',
    'f1_lower', 'f1_upper', 'n_resamples', 'n_excluded', 'n_missing', 'es_error_pct', 'es_error_sd', 'degenerate',
]

WAIC_COLUMNS: Final[List[str]] = [
    'cell', 'resample', 'subjects', 'trials', 'waic_shared', 'se_shared', 'waic_separate', 'se_separate',
    'delta_waic', 'delta_se',
]

SCATTER_COLUMNS: Final[List[str]] = ['cell', 'resample', 'subjects', 'trials', 'model', 'true_d', 'recovered_d']


def fit_seed(config: RunConfig, job_id: str) -> int:
    """Sampler seed of a fit job (independent of scheduling order)."""
    return int(derive_seed(config.seed, job_id).generate_state(1)[0])


def fit_outputs(directory: str, written: List[str], prune: bool) -> List[str]:
    """Files a fit job is accountable for (draw arrays are left out when they will be pruned)."""
    names = [os.path.basename(path) for path in written]
    if prune:
        names = [name for name in names if name not in (DRAWS, POINTWISE)]
    return [os.path.join(directory, name) for name in names]


def run_generate(root: str, job: JobSpec, config: RunConfig) -> List[str]:
    cell, resample = job.keys['cell'], job.keys['resample']
    dataset = generate_dataset(config.dataset_config(config.grid()[cell], resample))
    outputs = [dataset_path(cell, resample), env_trace_path(cell, resample)]
    with staging(os.path.join(root, outputs[0])) as temp:
        dataset.save(temp)
    with staging(os.path.join(root, outputs[1])) as temp:
        dataset.env_trace.to_csv(temp)
    return outputs


def run_perturb(root: str, job: JobSpec, config: RunConfig) -> List[str]:
    keys = job.keys
    source = SyntheticDataset.load(os.path.join(root, dataset_path(keys['cell'], keys['resample'])))
    dataset = perturb(source, keys['subjects'], keys['trials'], config.window_selector, config.window_stride)
    output = perturbed_path(keys['cell'], keys['resample'], keys['subjects'], keys['trials'])
    with staging(os.path.join(root, output)) as temp:
        dataset.save(temp)
    return [output]


def run_fit(root: str, job: JobSpec, config: RunConfig) -> List[str]:
    keys = job.keys
    dataset = SyntheticDataset.load(os.path.join(root, perturbed_path(keys['cell'], keys['resample'],
                                                                      keys['subjects'], keys['trials'])))
    spec = config.model_spec(keys['model'])
    fit = nuts_fit(spec, dataset, config.sampler_config(seed=fit_seed(config, job.id)), keep_pointwise=False)
    log.info(f'Fit {job.id}: usable={fit.usable} (max rhat {fit.max_rhat:.3f}, min ess {fit.min_ess:.0f}, '
             f'{int(fit.divergences.sum())} divergences, {fit.attempts} attempts)')
    directory = fit_dir(keys['cell'], keys['resample'], keys['subjects'], keys['trials'], keys['model'])
    with staging(os.path.join(root, directory)) as temp:
        written = save_fit(fit, temp)
    return fit_outputs(directory, written, config.prune)


def _model_metrics(fit: Union[FitResult, FitSummary], terms: Optional[WAICTerms], dataset: SyntheticDataset,
                   kind: ModelKind, alpha_level: float) -> Dict[str, Any]:
    diagnostics = fit.diagnostics() if isinstance(fit, FitResult) else fit.diagnostics
    entry = {
        'recovery': recovery_report(fit, dataset, alpha_level).to_dict(),
        'parameter_recovery': parameter_recovery(fit, dataset)._asdict(),
        'usable': bool(fit.usable),
        'attempts': int(fit.attempts),
        'diagnostics': {name: diagnostics[name] for name in ('max_rhat', 'min_ess', 'divergence_rate')},
        'waic': None,
        'group_difference': None,
    }
    if terms is not None:
        entry['waic'] = {**terms.summary()._asdict(), 'se': terms.se()}
    if kind is ModelKind.SEPARATE and isinstance(fit, FitResult):
        entry['group_difference'] = group_mean_difference(fit)._asdict()
    return entry


def run_metrics(root: str, job: JobSpec, config: RunConfig) -> List[str]:
    keys = job.keys
    condition = (keys['cell'], keys['resample'], keys['subjects'], keys['trials'])
    dataset = SyntheticDataset.load(os.path.join(root, perturbed_path(*condition)))
    directories = {kind: os.path.join(root, fit_dir(*condition, kind.value)) for kind in MODELS}
    fits = {kind: load_fit(directory) for kind, directory in directories.items()}
    terms = {kind: load_waic_terms(directory) for kind, directory in directories.items()}
    alpha_level = float(config.data.metrics.alpha_level)
    cell = config.grid()[keys['cell']]
    document = {
        'condition': {**keys, 'case_mode': cell.case.mode, 'control_mode': cell.control.mode,
                      'concentration': cell.case.concentration, 'true_d': dataset.true_d,
                      'window_start': dataset.window_start},
        'models': {kind.value: _model_metrics(fit, terms[kind], dataset, kind, alpha_level)
                   for kind, fit in fits.items()},
        'delta_waic': None,
    }
    shared, separate = (terms[kind] for kind in MODELS)
    if shared is not None and separate is not None:
        document['delta_waic'] = compare_waic(shared, separate)._asdict()
    output = metrics_path(*condition)
    write_json(os.path.join(root, output), document)
    return [output]


def _conditions(config: RunConfig) -> List[Dict[str, int]]:
    return [{'cell': cell, 'resample': resample, 'subjects': subjects, 'trials': trials}
            for cell in range(len(config.grid()))
            for resample in range(config.resamples)
            for subjects, trials in config.perturbations]


def _load_metrics(root: str, condition: Dict[str, int]) -> Optional[Dict[str, Any]]:
    path = os.path.join(root, metrics_path(**condition))
    if not os.path.exists(path):
        return None
    with open(path, mode='r') as stream:
        return json.load(stream)


def run_summarize(root: str, job: JobSpec, config: RunConfig) -> List[str]:
    """Collect every metrics document into the result tables (gaps are counted, not fatal)."""
    recovery, scatter, waic_rows = [], [], []
    reports: Dict[tuple, List[RecoveryReport]] = {}
    missing: Dict[tuple, int] = {}
    for condition in _conditions(config):
        group_key = (condition['subjects'], condition['trials'])
        document = _load_metrics(root, condition)
        if document is None:
            missing[group_key] = missing.get(group_key, 0) + 1
            continue
        info = document['condition']
        row = {**condition, 'case_mode': info['case_mode'], 'control_mode': info['control_mode'],
               'concentration': info['concentration']}
        waic_row = dict(condition)
        for kind in MODELS:
            entry = document['models'][kind.value]
            report = RecoveryReport(**entry['recovery'])
            reports.setdefault((kind.value, *group_key), []).append(report)
            recovery.append({**row, 'model': kind.value, **report.to_dict(),
                             **entry['parameter_recovery'], 'attempts': entry['attempts']})
            scatter.append({**condition, 'model': kind.value, 'true_d': report.true_d,
                            'recovered_d': report.recovered_d})
            if entry['waic'] is not None:
                waic_row[f'waic_{kind.value}'] = entry['waic']['waic']
                waic_row[f'se_{kind.value}'] = entry['waic']['se']
        if document['delta_waic'] is not None:
            waic_row['delta_waic'] = document['delta_waic']['delta']
            waic_row['delta_se'] = document['delta_waic']['se']
        waic_rows.append(waic_row)
    metrics = config.data.metrics
    aggregates = []
    for kind in MODELS:
        for subjects, trials in config.perturbations:
            group = reports.get((kind.value, subjects, trials), [])
            n_missing = missing.get((subjects, trials), 0)
            if n_missing:
                log.warning(f'Summary of {kind.value} at {subjects} subjects, {trials} trials '
                            f'is missing {n_missing} conditions')
            row = {'model': kind.value, 'subjects': subjects, 'trials': trials, 'n_missing': n_missing}
            if group:
                result = aggregate(group, n_bootstrap=int(metrics.bootstrap),
                                   seed=stable_hash([config.seed, kind.value, subjects, trials]),
                                   exclude_unusable=bool(metrics.exclude_unusable))
                row.update(result.to_dict())
            aggregates.append(row)
    outputs = [os.path.join(results_dir(), RESULT_FILES[name]) for name in ('recovery', 'aggregate', 'waic', 'scatter')]
    for path, columns, rows in zip(outputs, (RECOVERY_COLUMNS, AGGREGATE_COLUMNS, WAIC_COLUMNS, SCATTER_COLUMNS),
                                   (recovery, aggregates, waic_rows, scatter)):
        write_csv(os.path.join(root, path), columns, rows)
    if config.prune:
        _prune_fits(root, config)
    return outputs


def _prune_fits(root: str, config: RunConfig) -> None:
    count = 0
    for condition in _conditions(config):
        for kind in MODELS:
            directory = os.path.join(root, fit_dir(**condition, model=kind.value))
            if os.path.exists(os.path.join(directory, SIDECAR)):
                count += len(prune_fit(directory))
    log.info(f'Pruned {count} draw files')


def run_report(root: str, job: JobSpec, config: RunConfig) -> List[str]:
    written = render_tables(os.path.join(root, results_dir()))
    return relative(root, written)


STAGES: Final[Dict[JobKind, Callable[[str, JobSpec, RunConfig], List[str]]]] = {
    JobKind.GENERATE: run_generate,
    JobKind.PERTURB: run_perturb,
    JobKind.FIT: run_fit,
    JobKind.METRICS: run_metrics,
    JobKind.SUMMARIZE: run_summarize,
    JobKind.REPORT: run_report,
}


def run_job(root: str, job: Dict[str, Any], config: Dict[str, Any]) -> List[str]:
    """
    Execute one job and return its output paths relative to `root`.

    Arguments are plain dictionaries so this can be shipped to a worker process.
    """
    spec = JobSpec(id=job['id'], kind=JobKind(job['kind']), keys=dict(job['keys']),
                   depends=tuple(job['depends']))
    log.debug(f'Running {spec.id}')
    return STAGES[spec.kind](root, spec, RunConfig(config))
