# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Domain exceptions and shared exception handling for applications."""


# type annotations
from __future__ import annotations
from typing import Dict, Union, Callable, Type, Optional, Any

# standard libraries
import os
import sys
import logging
import functools
import traceback
from datetime import datetime

# external libs
from cmdkit.app import exit_status
from cmdkit.config import Namespace
from cmdkit.config import ConfigurationError
from cmdkit.ansi import faint, bold, magenta, COLOR_STDERR

# internal libs
from casecontrol.core.platform import default_path

# public interface
__all__ = ['display_critical', 'traceback_filepath', 'write_traceback',
           'handle_exception', 'get_shared_exception_mapping',
           'UsageError', 'DegenerateInput', 'RejectionFailure', 'InitializationError',
           'FitFailure', 'NonFiniteLikelihood', 'ManifestError', 'JobFailures', 'ValidationFailure', ]


def _display_message(levelname: str, error: Union[Exception, str],
                     module: str = None, colorized: Callable[[str], str] = None) -> None:
    """Generic message display for import-time warnings and errors."""
    text = error if isinstance(error, str) else f'{error.__class__.__name__}: {error}'
    if COLOR_STDERR:
        name = '' if not module else faint(f'[{module}]')
        level = levelname if colorized is None else bold(colorized(levelname))
    else:
        name = '' if not module else f'[{module}]'
        level = levelname
    print(f'{level} {name} {text}', file=sys.stderr)


display_critical = functools.partial(_display_message, 'CRITICAL', colorized=magenta)


class UsageError(ValueError):
    """An operation was called with arguments outside its domain."""


class DegenerateInput(ValueError):
    """Input data has no spread where a spread is required (e.g., zero pooled SD)."""


class RejectionFailure(RuntimeError):
    """Rejection sampling ran out of attempts before meeting the fidelity bound."""

    def __init__(self: RejectionFailure, attempts: int, best_mean_error: float, best_sd_error: float,
                 tolerance: float) -> None:
        self.attempts = attempts
        self.best_mean_error = best_mean_error
        self.best_sd_error = best_sd_error
        self.tolerance = tolerance
        super().__init__(f'No sample within tolerance {tolerance} after {attempts} attempts '
                         f'(best mean error {best_mean_error:.4f}, best SD error {best_sd_error:.4f})')


class InitializationError(RuntimeError):
    """Could not find an initial point with finite log density."""


class FitFailure(RuntimeError):
    """Sampler could not produce a usable fit (diagnostics attached)."""

    def __init__(self: FitFailure, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class NonFiniteLikelihood(ValueError):
    """A pointwise log-likelihood value is not finite."""

    def __init__(self: NonFiniteLikelihood, index: int, value: float) -> None:
        self.index = index
        self.value = value
        super().__init__(f'Non-finite log-likelihood at data point {index} ({value})')


class ManifestError(RuntimeError):
    """The run manifest is inconsistent with files on disk."""


class JobFailures(RuntimeError):
    """One or more jobs failed during execution."""


class ValidationFailure(RuntimeError):
    """Parameter recovery fell below the required threshold."""


def traceback_filepath(path: Namespace = None) -> str:
    """Construct filepath for writing traceback."""
    path = path or default_path
    time = datetime.now().strftime('%Y%m%d-%H%M%S')
    return os.path.join(path.log, f'exception-{time}.log')


def write_traceback(exc: Exception, site: Namespace = None, logger: logging.Logger = None,
                    status: int = exit_status.uncaught_exception, module: str = None) -> int:
    """Write exception to file and return exit code."""
    write = functools.partial(display_critical, module=module) if not logger else logger.critical
    path = traceback_filepath(site)
    with open(path, mode='w') as stream:
        print(traceback.format_exc(), file=stream)
    write(f'{exc.__class__.__name__}: ' + str(exc).replace('\n', ' - '))
    write(f'Exception traceback written to {path}')
    return status


def handle_exception(exc: Exception, logger: logging.Logger, status: int) -> int:
    """Log the exception argument and exit with `status`."""
    logger.critical(f'{exc.__class__.__name__}: ' + str(exc).replace('\n', ' - '))
    return status


def get_shared_exception_mapping(modname: str = 'casecontrol') -> Dict[Type[Exception], Callable[[Exception], int]]:
    """Globally defined exception cases for all application subcommands."""
    logger = logging.getLogger(modname)
    runtime_error = functools.partial(handle_exception, logger=logger, status=exit_status.runtime_error)
    return {
        ConfigurationError: functools.partial(handle_exception, logger=logger, status=exit_status.bad_config),
        UsageError: functools.partial(handle_exception, logger=logger, status=exit_status.bad_argument),
        FileNotFoundError: runtime_error,
        DegenerateInput: runtime_error,
        RejectionFailure: runtime_error,
        InitializationError: runtime_error,
        FitFailure: runtime_error,
        NonFiniteLikelihood: runtime_error,
        ManifestError: runtime_error,
        JobFailures: runtime_error,
        ValidationFailure: runtime_error,
        RuntimeError: runtime_error,
        Exception: functools.partial(write_traceback, logger=logger, status=exit_status.runtime_error),
    }
