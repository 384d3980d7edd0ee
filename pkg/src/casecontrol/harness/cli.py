# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Shared behaviour of the commands that advance a run through the pipeline."""


# type annotations
from __future__ import annotations
from typing import Optional, FrozenSet, Final

# standard libs
import os

# external libs
from cmdkit.app import Application
from cmdkit.cli import Interface

# internal libs
from casecontrol.core.logging import Logger, attach_run_log, detach_run_log
from casecontrol.core.exceptions import get_shared_exception_mapping
from casecontrol.harness.config import RunConfig, PROFILES
from casecontrol.harness.plan import JobKind, plan
from casecontrol.harness.execute import prepare_run, execute, RunSummary
from casecontrol.harness.artifacts import RUN_LOG, RESULT_FILES, results_dir

# public interface
__all__ = ['StageApp', 'add_run_arguments', 'print_tables', 'RUN_OPTIONS', ]

# initialize logger
log = Logger.with_name(__name__)


RUN_OPTIONS: Final[str] = f"""\
      --config       PATH    Run configuration document (TOML).
      --profile      NAME    Named preset ({', '.join(PROFILES)}).
      --seed         NUM     Master seed.
  -j, --jobs         NUM     Maximum concurrent jobs.
  -o, --output       DIR     Run directory.
      --resume               Continue the run stored in the output directory.\
"""


def add_run_arguments(interface: Interface) -> None:
    """Add the options every stage command shares."""
    interface.add_argument('--config', default=None, dest='config_path')
    interface.add_argument('--profile', default=None, choices=list(PROFILES))
    interface.add_argument('--seed', type=int, default=None)
    interface.add_argument('-j', '--jobs', type=int, default=None)
    interface.add_argument('-o', '--output', default=None)
    interface.add_argument('--resume', action='store_true')


class StageApp(Application):
    """Run every job up to and including the stages named by `kinds`."""

    kinds: FrozenSet[JobKind] = frozenset(JobKind)

    config_path: Optional[str] = None
    profile: Optional[str] = None
    seed: Optional[int] = None
    jobs: Optional[int] = None
    output: Optional[str] = None
    resume: bool = False

    summary: Optional[RunSummary] = None

    exceptions = {
        **get_shared_exception_mapping(__name__)
    }

    def load_config(self: StageApp) -> RunConfig:
        """Resolve configuration layers and prepare the run directory."""
        config = RunConfig.load(profile=self.profile, filepath=self.config_path, seed=self.seed,
                                jobs=self.jobs, output=self.output)
        return prepare_run(config, resume=self.resume)

    def run(self: StageApp) -> None:
        """Plan and execute the selected stages."""
        config = self.load_config()
        attach_run_log(os.path.join(config.output, RUN_LOG))
        try:
            self.summary = execute(config.output, config, plan(config), kinds=self.kinds)
        finally:
            detach_run_log()
        if self.summary.halted:
            raise RuntimeError(f'Halted by signal with {self.summary.pending} jobs pending')
        self.report(config)

    def report(self: StageApp, config: RunConfig) -> None:
        """Summarize what happened (override for richer output)."""
        log.info(f'{self.summary.done} jobs done, {self.summary.pending} pending in {config.output}')


def print_tables(root: str) -> None:
    """Write rendered text tables of the run at `root` to standard output."""
    for name in ('table1_text', 'table2_text'):
        path = os.path.join(root, results_dir(), RESULT_FILES[name])
        if os.path.exists(path):
            with open(path, mode='r') as stream:
                print(stream.read(), end='')
        else:
            log.warning(f'No table at {path}')
