# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Render the summary tables from `aggregate.csv`.

Detection accuracy has one row per model and perturbation, with FPR, FNR and
F1 and their interval half-widths. Effect-size recovery error has one row per
model and one column per perturbation, signed so that overestimation reads `+`
and underestimation reads `-`. Missing aggregates render as `n/a`.
"""


# type annotations
from __future__ import annotations
from typing import List, Dict, Tuple, Optional, Final

# standard libs
import os
import io
import csv
import math

# external libs
from rich import box
from rich.console import Console
from rich.table import Table

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.harness.artifacts import RESULT_FILES, staging, write_csv

# public interface
__all__ = ['render_tables', 'format_signed', 'format_interval', 'MISSING', 'TABLE_WIDTH', ]

# initialize logger
log = Logger.with_name(__name__)


MISSING: Final[str] = 'n/a'
TABLE_WIDTH: Final[int] = 120


def _number(text: Optional[str]) -> float:
    if text is None or text == '':
        return math.nan
    return float(text)


def format_signed(value: float) -> str:
    """Two decimals with an explicit sign; exactly zero (after rounding) has none."""
    if not math.isfinite(value):
        return MISSING
    rounded = round(value, 2)
    if rounded == 0:
        return '0.00'
    return f'{rounded:+.2f}'


def format_interval(value: float, half_width: float) -> str:
    if not math.isfinite(value):
        return MISSING
    if not math.isfinite(half_width):
        return f'{value:.2f}'
    return f'{value:.2f} +/- {half_width:.2f}'


def _read_aggregate(results_dir: str) -> List[Dict[str, str]]:
    path = os.path.join(results_dir, RESULT_FILES['aggregate'])
    if not os.path.exists(path):
        raise FileNotFoundError(f'No aggregate results in {results_dir} (run the summarize stage first)')
    with open(path, mode='r', newline='') as stream:
        return list(csv.DictReader(stream))


def _render_text(table: Table) -> str:
    buffer = io.StringIO()
    Console(file=buffer, width=TABLE_WIDTH, color_system=None, force_terminal=False, legacy_windows=False,
            soft_wrap=False).print(table)
    return buffer.getvalue()


def _write_text(target: str, text: str) -> None:
    with staging(target) as temp:
        with open(temp, mode='w') as stream:
            stream.write(text)


def _accuracy_rows(rows: List[Dict[str, str]]) -> List[Dict[str, str]]:
    table = []
    for row in rows:
        table.append({
            'model': row['model'],
            'subjects': row['subjects'],
            'trials': row['trials'],
            'fpr': format_interval(_number(row.get('fpr_pct')), _number(row.get('fpr_ci'))),
            'fnr': format_interval(_number(row.get('fnr_pct')), _number(row.get('fnr_ci'))),
            'f1': format_interval(_number(row.get('f1_pct')), _number(row.get('f1_ci'))),
            'n': row.get('n_resamples') or '0',
        })
    return table


def _error_grid(rows: List[Dict[str, str]]) -> Tuple[List[str], List[Dict[str, str]]]:
    perturbations: List[Tuple[str, str]] = []
    models: List[str] = []
    values: Dict[Tuple[str, Tuple[str, str]], float] = {}
    for row in rows:
        key = (row['subjects'], row['trials'])
        if key not in perturbations:
            perturbations.append(key)
        if row['model'] not in models:
            models.append(row['model'])
        values[row['model'], key] = _number(row.get('es_error_pct'))
    labels = [f'{subjects} subj. {trials} trials' for subjects, trials in perturbations]
    grid = []
    for model in models:
        entry = {'model': model}
        for label, key in zip(labels, perturbations):
            entry[label] = format_signed(values.get((model, key), math.nan))
        grid.append(entry)
    return labels, grid


def render_tables(results_dir: str) -> List[str]:
    """
    Write detection-accuracy and effect-size-error tables as CSV and aligned text.

    Returns written paths (table1.csv, table1.txt, table2.csv, table2.txt).
    """
    rows = _read_aggregate(results_dir)
    written = []

    accuracy = _accuracy_rows(rows)
    columns = ['model', 'subjects', 'trials', 'fpr', 'fnr', 'f1', 'n']
    written.append(os.path.join(results_dir, RESULT_FILES['table1']))
    write_csv(written[-1], columns, accuracy)
    table = Table(title='Detection accuracy (%)', box=box.ASCII)
    for name, header in zip(columns, ['Model', 'Subjects', 'Trials', 'FPR', 'FNR', 'F1', 'N']):
        table.add_column(header, justify='left' if name == 'model' else 'right')
    for row in accuracy:
        table.add_row(*[row[name] for name in columns])
    written.append(os.path.join(results_dir, RESULT_FILES['table1_text']))
    _write_text(written[-1], _render_text(table))

    labels, grid = _error_grid(rows)
    columns = ['model', *labels]
    written.append(os.path.join(results_dir, RESULT_FILES['table2']))
    write_csv(written[-1], columns, grid)
    table = Table(title='Effect size recovery error (%)', box=box.ASCII)
    for name in columns:
        table.add_column('Model' if name == 'model' else name, justify='left' if name == 'model' else 'right')
    for row in grid:
        table.add_row(*[row[name] for name in columns])
    written.append(os.path.join(results_dir, RESULT_FILES['table2_text']))
    _write_text(written[-1], _render_text(table))

    gaps = sum(row['fpr'] == MISSING or row['f1'] == MISSING for row in accuracy)
    if gaps:
        log.warning(f'Rendered tables with {gaps} incomplete rows')
    log.info(f'Rendered tables in {results_dir}')
    return written
