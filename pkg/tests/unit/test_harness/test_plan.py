# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Unit tests for the job graph."""


# type annotations
from typing import Dict, Any

# standard libs
from collections import Counter

# internal libs
from casecontrol.core.config import default
from casecontrol.sim.dataset import FULL_CONCENTRATIONS
from casecontrol.harness.config import RunConfig, RUN_SECTIONS
from casecontrol.harness.plan import plan, JobKind, cell_label, resample_label, perturbation_label


def run_config(**changes: Dict[str, Any]) -> RunConfig:
    data = {section: dict(default[section]) for section in RUN_SECTIONS}
    for section, values in changes.items():
        data[section].update(values)
    return RunConfig(data)


class TestPlan:
    """Unit tests for `plan`."""

    def test_counts(self) -> None:
        config = run_config(run={'resamples': 1}, grid={'concentrations': list(FULL_CONCENTRATIONS)})
        counts = Counter(job.kind for job in plan(config))
        assert counts[JobKind.GENERATE] == 36
        assert counts[JobKind.PERTURB] == 36 * 4
        assert counts[JobKind.FIT] == 288
        assert counts[JobKind.METRICS] == 144
        assert counts[JobKind.SUMMARIZE] == counts[JobKind.REPORT] == 1

    def test_ids(self) -> None:
        jobs = plan(run_config(run={'resamples': 1, 'perturbations': [[50, 200]]}))
        assert [job.id for job in jobs[:5]] == ['generate/c00-r0000', 'perturb/c00-r0000-s50t200',
                                               'fit/c00-r0000-s50t200-shared', 'fit/c00-r0000-s50t200-separate',
                                               'metrics/c00-r0000-s50t200']
        assert [job.id for job in jobs[-2:]] == ['summarize', 'report']

    def test_dependency_order(self) -> None:
        jobs = plan(run_config(run={'resamples': 2}))
        seen = set()
        for job in jobs:
            assert all(dep in seen for dep in job.depends)
            seen.add(job.id)
        assert len(seen) == len(jobs)

    def test_summarize_waits_on_metrics(self) -> None:
        jobs = plan(run_config(run={'resamples': 2}))
        summarize = next(job for job in jobs if job.kind is JobKind.SUMMARIZE)
        assert len(summarize.depends) == 12 * 2 * 4
        assert all(dep.startswith('metrics/') for dep in summarize.depends)

    def test_keys(self) -> None:
        jobs = plan(run_config(run={'resamples': 1, 'perturbations': [[15, 40]]}))
        fit = next(job for job in jobs if job.kind is JobKind.FIT)
        assert fit.keys == {'cell': 0, 'resample': 0, 'subjects': 15, 'trials': 40, 'model': 'shared'}
        assert fit.to_dict()['depends'] == ['perturb/c00-r0000-s15t40']

    def test_tolerant(self) -> None:
        assert JobKind.SUMMARIZE.tolerant
        assert not JobKind.METRICS.tolerant


class TestLabels:
    """Unit tests for id labels."""

    def test_labels(self) -> None:
        assert cell_label(3) == 'c03'
        assert resample_label(7) == 'r0007'
        assert perturbation_label(15, 40) == 's15t40'
