# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Generate the synthetic datasets of a run and their reduced versions."""


# type annotations
from __future__ import annotations

# external libs
from cmdkit.cli import Interface

# internal libs
from casecontrol.harness.cli import StageApp, add_run_arguments, RUN_OPTIONS
from casecontrol.harness.plan import JobKind

# public interface
__all__ = ['GenerateApp', ]


APP_NAME = 'ccs generate'
APP_USAGE = f"""\
Usage:
  {APP_NAME} [-h] [--config PATH] [--profile NAME] [--seed NUM] [-j NUM] [-o DIR] [--resume]
  Generate synthetic case-control datasets.\
"""

APP_HELP = f"""\
{APP_USAGE}

Every grid configuration and resample gets one dataset (fidelity-checked group
parameters, one roving-bandit trace, simulated choices). Each dataset is then
reduced to every configured perturbation (fewer subjects, shorter trial window).

Options:
{RUN_OPTIONS}
  -h, --help                 Show this message and exit.\
"""


class GenerateApp(StageApp):
    """Generate synthetic datasets."""

    interface = Interface(APP_NAME, APP_USAGE, APP_HELP)
    add_run_arguments(interface)

    kinds = frozenset({JobKind.GENERATE, JobKind.PERTURB})
