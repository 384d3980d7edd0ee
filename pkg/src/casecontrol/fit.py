# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Fit hierarchical models to synthetic datasets.

Without `--dataset` this advances a run through its fit stage. With `--dataset`
it fits a single dataset file and writes the fit to the output directory.

Example:
    $ ccs fit --dataset out/datasets/c03/r0000/s50t200/dataset.jsonl --model separate -o fit-c03
"""


# type annotations
from __future__ import annotations
from typing import Optional

# standard libs
import os

# external libs
from cmdkit.cli import Interface, ArgumentError

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.sim.dataset import SyntheticDataset
from casecontrol.inference.posterior import ModelKind
from casecontrol.inference.sampler import nuts_fit
from casecontrol.inference.storage import save_fit
from casecontrol.stats import parameter_recovery
from casecontrol.harness.cli import StageApp, add_run_arguments, RUN_OPTIONS
from casecontrol.harness.config import RunConfig
from casecontrol.harness.plan import JobKind

# public interface
__all__ = ['FitApp', ]

# initialize logger
log = Logger.with_name(__name__)


APP_NAME = 'ccs fit'
APP_USAGE = f"""\
Usage:
  {APP_NAME} [-h] [--config PATH] [--profile NAME] [--seed NUM] [-j NUM] [-o DIR] [--resume]
  {APP_NAME} --dataset FILE --model KIND -o DIR [--config PATH] [--seed NUM]
  Fit hierarchical models with the No-U-Turn sampler.\
"""

APP_HELP = f"""\
{APP_USAGE}

Each dataset is fit twice: once with one prior shared by all subjects and once
with separate priors for case and control groups. A fit that fails convergence
checks is retried once at a higher target acceptance rate.

Options:
{RUN_OPTIONS}
      --dataset      FILE    Fit a single dataset file instead of a run.
      --model        KIND    Prior structure for --dataset (shared or separate).
  -h, --help                 Show this message and exit.\
"""


class FitApp(StageApp):
    """Fit hierarchical models."""

    interface = Interface(APP_NAME, APP_USAGE, APP_HELP)
    add_run_arguments(interface)

    dataset: Optional[str] = None
    interface.add_argument('--dataset', default=None)

    model: Optional[str] = None
    interface.add_argument('--model', default=None, choices=[kind.value for kind in ModelKind])

    kinds = frozenset({JobKind.GENERATE, JobKind.PERTURB, JobKind.FIT})

    def run(self: FitApp) -> None:
        """Fit a run or a single file."""
        if self.dataset is None:
            if self.model is not None:
                raise ArgumentError('--model requires --dataset')
            super().run()
        else:
            self.fit_file()

    def fit_file(self: FitApp) -> None:
        """Fit one dataset file and write the result to --output."""
        if self.model is None or self.output is None:
            raise ArgumentError('--dataset requires --model and --output')
        config = RunConfig.load(profile=self.profile, filepath=self.config_path, seed=self.seed)
        dataset = SyntheticDataset.load(self.dataset)
        fit = nuts_fit(config.model_spec(self.model), dataset, config.sampler_config())
        written = save_fit(fit, self.output)
        recovery = parameter_recovery(fit, dataset)
        log.info(f'Fit {os.path.basename(self.dataset)} ({self.model}): usable={fit.usable}, '
                 f'max rhat {fit.max_rhat:.3f}, min ess {fit.min_ess:.0f}, '
                 f'alpha rho {recovery.alpha_rho:.3f}, tau rho {recovery.tau_rho:.3f}')
        log.info(f'Wrote {len(written)} files to {self.output}')
