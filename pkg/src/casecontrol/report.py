# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Summarize scored conditions into result tables."""


# type annotations
from __future__ import annotations

# external libs
from cmdkit.cli import Interface

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.exceptions import ManifestError
from casecontrol.harness.cli import StageApp, add_run_arguments, print_tables, RUN_OPTIONS
from casecontrol.harness.config import RunConfig
from casecontrol.harness.execute import verify_manifest
from casecontrol.harness.plan import JobKind

# public interface
__all__ = ['ReportApp', ]

# initialize logger
log = Logger.with_name(__name__)


APP_NAME = 'ccs report'
APP_USAGE = f"""\
Usage:
  {APP_NAME} [-h] [--config PATH] [--profile NAME] [--seed NUM] [-o DIR] [--resume] [--verify]
  Render result tables from computed metrics.\
"""

APP_HELP = f"""\
{APP_USAGE}

Collects every metrics document into recovery, aggregate, information-criterion
and scatter CSV files, then renders detection accuracy and effect-size error
tables (CSV and aligned text). Conditions without metrics are reported as gaps.

Options:
{RUN_OPTIONS}
      --verify               Only check the manifest hash chain against files on disk.
  -h, --help                 Show this message and exit.\
"""


class ReportApp(StageApp):
    """Render result tables."""

    interface = Interface(APP_NAME, APP_USAGE, APP_HELP)
    add_run_arguments(interface)

    verify: bool = False
    interface.add_argument('--verify', action='store_true')

    kinds = frozenset({JobKind.SUMMARIZE, JobKind.REPORT})

    def run(self: ReportApp) -> None:
        """Render tables or verify the run."""
        if not self.verify:
            super().run()
            return
        root = self.output or RunConfig.load(profile=self.profile, filepath=self.config_path).output
        problems = verify_manifest(root)
        for job_id, reason in problems.items():
            log.error(f'{job_id}: {reason}')
        if problems:
            raise ManifestError(f'{len(problems)} completed jobs no longer match their outputs in {root}')
        log.info(f'Manifest verified ({root})')

    def report(self: ReportApp, config: RunConfig) -> None:
        """Print the rendered tables."""
        super().report(config)
        print_tables(config.output)
