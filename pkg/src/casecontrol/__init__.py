# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Initialization and entry-point for console application."""


# standard libs
import sys
from importlib.metadata import version as get_version, PackageNotFoundError

# external libs
from cmdkit.app import Application, ApplicationGroup
from cmdkit.cli import Interface

# internal libs
from casecontrol.core.logging import Logger, initialize_logging
from casecontrol.core.signal import register_handlers
from casecontrol.generate import GenerateApp
from casecontrol.fit import FitApp
from casecontrol.metrics import MetricsApp
from casecontrol.report import ReportApp
from casecontrol.run import RunAllApp
from casecontrol.validate import ValidateApp

# public interface
__all__ = ['CaseControlApp', 'main', '__version__']

# project metadata
try:
    __version__ = get_version('casecontrol')
except PackageNotFoundError:
    __version__ = 'unknown'

__description__ = 'Simulate case-control learning studies and measure hierarchical model recovery.'

# initialize logger
log = Logger.with_name('casecontrol')


# inject logger setup into command-line framework
Application.log_critical = log.critical
Application.log_exception = log.exception


APP_NAME = 'ccs'
APP_USAGE = f"""\
Usage:
  {APP_NAME} [-h] [-v] <command> [<args>...]
  {__description__}\
"""

APP_HELP = f"""\
{APP_USAGE}

Commands:
  generate               {GenerateApp.__doc__}
  fit                    {FitApp.__doc__}
  metrics                {MetricsApp.__doc__}
  report                 {ReportApp.__doc__}
  run-all                {RunAllApp.__doc__} (recommended)
  validate               {ValidateApp.__doc__}

Options:
  -h, --help             Show this message and exit.
  -v, --version          Show the version and exit.\
"""


class CaseControlApp(ApplicationGroup):
    """Top-level application class for console application."""

    interface = Interface(APP_NAME, APP_USAGE, APP_HELP)
    interface.add_argument('-v', '--version', action='version', version=__version__)
    interface.add_argument('command')

    command = None
    commands = {
        'generate': GenerateApp,
        'fit': FitApp,
        'metrics': MetricsApp,
        'report': ReportApp,
        'run-all': RunAllApp,
        'validate': ValidateApp,
    }


def main() -> int:
    """Entry-point for console application."""
    initialize_logging()
    register_handlers()
    return CaseControlApp.main(sys.argv[1:])
