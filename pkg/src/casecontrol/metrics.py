# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Score every fitted condition of a run."""


# type annotations
from __future__ import annotations

# external libs
from cmdkit.cli import Interface

# internal libs
from casecontrol.harness.cli import StageApp, add_run_arguments, RUN_OPTIONS
from casecontrol.harness.plan import JobKind

# public interface
__all__ = ['MetricsApp', ]


APP_NAME = 'ccs metrics'
APP_USAGE = f"""\
Usage:
  {APP_NAME} [-h] [--config PATH] [--profile NAME] [--seed NUM] [-j NUM] [-o DIR] [--resume]
  Compute recovery metrics for fitted datasets.\
"""

APP_HELP = f"""\
{APP_USAGE}

Runs any missing upstream stages, then writes one metrics document per dataset and
perturbation: recovered effect size and detection decision for both models,
parameter recovery, information criteria, and the separate-priors group comparison.

Options:
{RUN_OPTIONS}
  -h, --help                 Show this message and exit.\
"""


class MetricsApp(StageApp):
    """Compute recovery metrics."""

    interface = Interface(APP_NAME, APP_USAGE, APP_HELP)
    add_run_arguments(interface)

    kinds = frozenset({JobKind.GENERATE, JobKind.PERTURB, JobKind.FIT, JobKind.METRICS})
