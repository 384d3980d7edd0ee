# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Desk-scale study reproductions.

These take hours and only run with CASECONTROL_STUDY set. The desk run honours
CASECONTROL_RUN_OUTPUT so a finished run can be reused.
"""


# type annotations
from typing import Dict, List, Tuple

# standard libs
import os
import csv
import math
import itertools

# external libs
import pytest
import numpy as np

# internal libs
from casecontrol.core.seeding import derive_seed
from casecontrol.sim.agent import BetaSpec
from casecontrol.sim.dataset import (GroupSpec, GroupLabel, sample_group_params, build_grid, DEFAULT_CASE_MODES,
                                     FULL_CONCENTRATIONS)
from casecontrol.harness.config import RunConfig
from casecontrol.harness.plan import plan
from casecontrol.harness.execute import prepare_run, execute
from casecontrol.validate import check_recovery

# mark all tests in this module
pytestmark = pytest.mark.study


@pytest.fixture(scope='module')
def desk_run(tmp_path_factory: pytest.TempPathFactory) -> str:
    """Output directory of a complete desk-profile run."""
    output = os.getenv('CASECONTROL_RUN_OUTPUT') or str(tmp_path_factory.mktemp('desk'))
    config = prepare_run(RunConfig.load(profile='desk', output=output, jobs=os.cpu_count()), resume=False)
    execute(config.output, config, plan(config))
    return config.output


def read_rows(root: str, name: str) -> List[Dict[str, str]]:
    with open(os.path.join(root, 'results', name), newline='') as stream:
        return list(csv.DictReader(stream))


def aggregate_by(root: str) -> Dict[Tuple[str, int, int], Dict[str, float]]:
    table = {}
    for row in read_rows(root, 'aggregate.csv'):
        values = {key: float(value) if value not in ('', 'true', 'false') else math.nan
                  for key, value in row.items() if key not in ('model', 'subjects', 'trials')}
        table[row['model'], int(row['subjects']), int(row['trials'])] = values
    return table


class TestStudy:
    """Reproduce the qualitative findings at desk scale."""

    def test_recovery(self) -> None:
        for result in check_recovery(n_subjects=25, n_trials=200, threshold=0.90):
            assert result.passed, f'{result.model.value}: alpha rho {result.alpha_rho:.3f}'

    def test_bias_direction(self, desk_run: str) -> None:
        table = aggregate_by(desk_run)
        assert table['shared', 50, 200]['es_error_pct'] < 0
        assert table['separate', 50, 200]['es_error_pct'] > 0
        for model in ('shared', 'separate'):
            assert abs(table[model, 50, 40]['es_error_pct']) > abs(table[model, 50, 200]['es_error_pct'])
        assert abs(table['shared', 50, 40]['es_error_pct']) > abs(table['separate', 50, 40]['es_error_pct'])

    def test_accuracy_ordering(self, desk_run: str) -> None:
        table = aggregate_by(desk_run)
        shared, separate = table['shared', 50, 200], table['separate', 50, 200]
        assert separate['f1_lower'] > shared['f1_pct'] or separate['f1_pct'] > shared['f1_upper']
        assert shared['fnr_pct'] - shared['fnr_ci'] > separate['fnr_pct'] + separate['fnr_ci']
        assert separate['fpr_pct'] - separate['fpr_ci'] > shared['fpr_pct'] + shared['fpr_ci']

    def test_information_criterion_unstable(self, desk_run: str) -> None:
        grid = RunConfig.load(profile='desk').grid()
        middle = next(index for index, cell in enumerate(grid) if cell.case.mode == 0.5 and
                      cell.case.concentration == 30)
        signs = [np.sign(float(row['delta_waic'])) for row in read_rows(desk_run, 'waic.csv')
                 if int(row['cell']) == middle and row['delta_waic'] and int(row['trials']) == 200]
        assert signs
        minority = min(signs.count(1.0), signs.count(-1.0))
        assert minority >= 0.1 * len(signs)

    def test_group_fidelity(self) -> None:
        tau = BetaSpec(0.15, 10)
        cells = build_grid(DEFAULT_CASE_MODES, FULL_CONCENTRATIONS)
        specs = [cell.case for cell in cells]
        for index, alpha in zip(range(1000), itertools.cycle(specs)):
            group = GroupSpec(alpha, tau, 50, GroupLabel.CASE)
            params = sample_group_params(group, 0.02, 10_000, np.random.default_rng(derive_seed(0, index)))
            values = np.array([p.learning_rate for p in params])
            assert abs(values.mean() - alpha.mean) <= 0.02
            assert abs(values.std(ddof=1) - alpha.sd) <= 0.02
