# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Parameter-recovery sanity check.

Simulates subjects whose learning rates are uniform on (0, 1) in both groups,
fits both models, and requires the Pearson correlation between posterior-mean and
true learning rates to exceed a threshold for each.

Example:
    >>> from casecontrol.validate import check_recovery
    >>> results = check_recovery(n_subjects=25, n_trials=200, seed=1)
    >>> all(result.passed for result in results)
    True
"""


# type annotations
from __future__ import annotations
from typing import List, NamedTuple, Optional, Final

# external libs
from cmdkit.app import Application
from cmdkit.cli import Interface
from rich.console import Console
from rich.table import Table

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.exceptions import get_shared_exception_mapping, ValidationFailure
from casecontrol.sim.agent import BetaSpec
from casecontrol.sim.dataset import GroupSpec, GroupLabel, DatasetConfig, generate_dataset
from casecontrol.inference.posterior import ModelKind
from casecontrol.inference.sampler import nuts_fit
from casecontrol.stats import parameter_recovery
from casecontrol.harness.config import RunConfig
from casecontrol.harness.plan import MODELS

# public interface
__all__ = ['ValidateApp', 'check_recovery', 'RecoveryCheck', 'UNIFORM_ALPHA',
           'DEFAULT_THRESHOLD', 'DEFAULT_SUBJECTS', 'DEFAULT_TRIALS', ]

# initialize logger
log = Logger.with_name(__name__)


UNIFORM_ALPHA: Final[BetaSpec] = BetaSpec(0.5, 2.0)
DEFAULT_THRESHOLD: Final[float] = 0.90
DEFAULT_SUBJECTS: Final[int] = 25
DEFAULT_TRIALS: Final[int] = 200


class RecoveryCheck(NamedTuple):
    """Recovery quality of one model."""
    model: ModelKind
    alpha_rho: float
    tau_rho: float
    usable: bool
    passed: bool


def check_recovery(n_subjects: int = DEFAULT_SUBJECTS, n_trials: int = DEFAULT_TRIALS,
                   threshold: float = DEFAULT_THRESHOLD, seed: Optional[int] = None,
                   config: Optional[RunConfig] = None) -> List[RecoveryCheck]:
    """Fit both models to one uniform-learning-rate dataset (`n_subjects` per group)."""
    config = config or RunConfig.load(seed=seed)
    seed = config.seed if seed is None else seed
    tau = BetaSpec(float(config.data.dataset.tau_mode), float(config.data.dataset.tau_concentration))
    # looser fidelity tolerance for uniform draws
    dataset = generate_dataset(DatasetConfig(case=GroupSpec(UNIFORM_ALPHA, tau, n_subjects, GroupLabel.CASE),
                                             control=GroupSpec(UNIFORM_ALPHA, tau, n_subjects, GroupLabel.CONTROL),
                                             n_trials=n_trials, env=config.bandit_config(), seed=seed,
                                             tolerance=0.05, v0=float(config.data.task.v0),
                                             param_clamp=float(config.data.model.param_clamp)))
    results = []
    for kind in MODELS:
        fit = nuts_fit(config.model_spec(kind), dataset, config.sampler_config(seed=seed))
        recovery = parameter_recovery(fit, dataset)
        passed = bool(fit.usable and recovery.alpha_rho > threshold)
        log.info(f'{kind.value}: alpha rho {recovery.alpha_rho:.3f}, tau rho {recovery.tau_rho:.3f} '
                 f'(usable={fit.usable})')
        if not fit.usable:
            log.warning(f'{kind.value}: fit failed the convergence gate, recovery check not passed')
        results.append(RecoveryCheck(kind, recovery.alpha_rho, recovery.tau_rho, fit.usable, passed))
    return results


APP_NAME = 'ccs validate'
APP_USAGE = f"""\
Usage:
  {APP_NAME} [-h] [--threshold NUM] [--subjects NUM] [--trials NUM] [--seed NUM] [--config PATH]
  Check that both models recover individual learning rates.\
"""

APP_HELP = f"""\
{APP_USAGE}

Learning rates are drawn uniformly in both groups. Passes when both the shared-prior
and separate-prior fits converge and the correlation between posterior-mean and true
learning rates exceeds the threshold for each.

Options:
      --threshold    NUM     Minimum correlation (default: {DEFAULT_THRESHOLD}).
      --subjects     NUM     Subjects per group (default: {DEFAULT_SUBJECTS}).
      --trials       NUM     Trials per subject (default: {DEFAULT_TRIALS}).
      --seed         NUM     Master seed.
      --config       PATH    Run configuration document (TOML) for sampler and task settings.
  -h, --help                 Show this message and exit.\
"""


class ValidateApp(Application):
    """Parameter-recovery sanity check."""

    interface = Interface(APP_NAME, APP_USAGE, APP_HELP)

    threshold: float = DEFAULT_THRESHOLD
    interface.add_argument('--threshold', type=float, default=threshold)

    subjects: int = DEFAULT_SUBJECTS
    interface.add_argument('--subjects', type=int, default=subjects)

    trials: int = DEFAULT_TRIALS
    interface.add_argument('--trials', type=int, default=trials)

    seed: Optional[int] = None
    interface.add_argument('--seed', type=int, default=None)

    config_path: Optional[str] = None
    interface.add_argument('--config', default=None, dest='config_path')

    exceptions = {
        **get_shared_exception_mapping(__name__)
    }

    def run(self: ValidateApp) -> None:
        """Fit, print the results, and fail below threshold."""
        config = RunConfig.load(filepath=self.config_path, seed=self.seed)
        results = check_recovery(self.subjects, self.trials, self.threshold, config=config)
        table = Table(title=f'Parameter recovery ({self.subjects} per group, {self.trials} trials)')
        for name in ('Model', 'alpha rho', 'tau rho', 'Usable', 'Passed'):
            table.add_column(name)
        for result in results:
            table.add_row(result.model.value, f'{result.alpha_rho:.3f}', f'{result.tau_rho:.3f}',
                          str(result.usable), str(result.passed))
        Console().print(table)
        failed = [result.model.value for result in results if not result.passed]
        if failed:
            raise ValidationFailure(f'Learning-rate recovery below {self.threshold} for {", ".join(failed)}')
