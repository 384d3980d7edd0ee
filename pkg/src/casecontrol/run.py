# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Run the whole study pipeline."""


# type annotations
from __future__ import annotations

# external libs
from cmdkit.cli import Interface

# internal libs
from casecontrol.harness.cli import StageApp, add_run_arguments, print_tables, RUN_OPTIONS
from casecontrol.harness.config import RunConfig
from casecontrol.harness.plan import JobKind

# public interface
__all__ = ['RunAllApp', ]


APP_NAME = 'ccs run-all'
APP_USAGE = f"""\
Usage:
  {APP_NAME} [-h] [--config PATH] [--profile NAME] [--seed NUM] [-j NUM] [-o DIR] [--resume]
  Generate, fit, score and report a complete study.\
"""

APP_HELP = f"""\
{APP_USAGE}

Plans every job for the configured grid, resamples and perturbations and runs them
with at most --jobs at once. Progress is recorded in a manifest inside the run
directory; an interrupted run continues with --resume and produces the same
files as an uninterrupted one.

Environment:
  CASECONTROL_RUN_OUTPUT     Run directory (overridden by --output).
  CASECONTROL_RUN_JOBS       Maximum concurrent jobs (overridden by --jobs).

Options:
{RUN_OPTIONS}
  -h, --help                 Show this message and exit.\
"""


class RunAllApp(StageApp):
    """Run the full pipeline."""

    interface = Interface(APP_NAME, APP_USAGE, APP_HELP)
    add_run_arguments(interface)

    kinds = frozenset(JobKind)

    def report(self: RunAllApp, config: RunConfig) -> None:
        """Print the rendered tables."""
        super().report(config)
        print_tables(config.output)
