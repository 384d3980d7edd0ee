# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Run directory layout, atomic writes, and content hashing.

    <output>/
        run.toml
        manifest.db
        logs/run.log
        datasets/c03/r0007/dataset.jsonl
        datasets/c03/r0007/env_trace.csv
        datasets/c03/r0007/s15t40/dataset.jsonl
        fits/c03/r0007/s15t40/{shared,separate}/{fit.json,draws.npy,waic.npy}
        metrics/c03/r0007/s15t40/metrics.json
        results/{recovery,aggregate,waic,scatter,table1,table2}.csv
        results/{table1,table2}.txt

Paths recorded in the manifest are relative to the run directory.
"""


# type annotations
from __future__ import annotations
from typing import List, Dict, Any, Iterator, Iterable, Final

# standard libs
import os
import csv
import json
import shutil
import hashlib
from contextlib import contextmanager

# internal libs
from casecontrol.harness.plan import cell_label, resample_label, perturbation_label

# public interface
__all__ = ['RUN_LOG', 'RESULT_FILES', 'dataset_dir', 'dataset_path', 'env_trace_path', 'perturbed_path',
           'fit_dir', 'metrics_path', 'results_dir', 'staging', 'write_json', 'write_csv', 'format_value',
           'file_digest', 'hash_files', 'hash_values', 'relative', ]


RUN_LOG: Final[str] = os.path.join('logs', 'run.log')
DATASET_FILE: Final[str] = 'dataset.jsonl'
ENV_TRACE_FILE: Final[str] = 'env_trace.csv'
METRICS_FILE: Final[str] = 'metrics.json'

RESULT_FILES: Final[Dict[str, str]] = {
    'recovery': 'recovery.csv',
    'aggregate': 'aggregate.csv',
    'waic': 'waic.csv',
    'scatter': 'scatter.csv',
    'table1': 'table1.csv',
    'table2': 'table2.csv',
    'table1_text': 'table1.txt',
    'table2_text': 'table2.txt',
}


def dataset_dir(cell: int, resample: int) -> str:
    return os.path.join('datasets', cell_label(cell), resample_label(resample))


def dataset_path(cell: int, resample: int) -> str:
    return os.path.join(dataset_dir(cell, resample), DATASET_FILE)


def env_trace_path(cell: int, resample: int) -> str:
    return os.path.join(dataset_dir(cell, resample), ENV_TRACE_FILE)


def perturbed_path(cell: int, resample: int, subjects: int, trials: int) -> str:
    return os.path.join(dataset_dir(cell, resample), perturbation_label(subjects, trials), DATASET_FILE)


def fit_dir(cell: int, resample: int, subjects: int, trials: int, model: str) -> str:
    return os.path.join('fits', cell_label(cell), resample_label(resample),
                        perturbation_label(subjects, trials), model)


def metrics_path(cell: int, resample: int, subjects: int, trials: int) -> str:
    return os.path.join('metrics', cell_label(cell), resample_label(resample),
                        perturbation_label(subjects, trials), METRICS_FILE)


def results_dir() -> str:
    return 'results'


@contextmanager
def staging(target: str) -> Iterator[str]:
    """
    Yield a temporary sibling path that atomically replaces `target` on success.

    Works for files and directories. Nothing is left behind if the block raises.
    """
    parent = os.path.dirname(os.path.abspath(target))
    os.makedirs(parent, exist_ok=True)
    temp = os.path.join(parent, f'.{os.path.basename(target)}.tmp-{os.getpid()}')
    _remove(temp)
    try:
        yield temp
    except BaseException:
        _remove(temp)
        raise
    if os.path.isdir(target) and not os.path.islink(target):
        shutil.rmtree(target)
    os.replace(temp, target)


def _remove(path: str) -> None:
    if os.path.isdir(path) and not os.path.islink(path):
        shutil.rmtree(path)
    elif os.path.exists(path):
        os.remove(path)


def write_json(target: str, data: Any) -> None:
    """Atomically write `data` as indented JSON with sorted keys."""
    with staging(target) as temp:
        with open(temp, mode='w') as stream:
            json.dump(data, stream, indent=2, sort_keys=True)
            stream.write('\n')


def format_value(value: Any) -> str:
    """Text form of a table value (floats keep full precision, missing values are empty)."""
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return '' if value is None else str(value)


def write_csv(target: str, columns: List[str], rows: Iterable[Dict[str, Any]]) -> None:
    """Atomically write `rows` with `columns` as the header (absent keys left empty)."""
    with staging(target) as temp:
        with open(temp, mode='w', newline='') as stream:
            writer = csv.writer(stream, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(row.get(name)) for name in columns])


def file_digest(filepath: str) -> str:
    """SHA-256 of file contents."""
    digest = hashlib.sha256()
    with open(filepath, mode='rb') as stream:
        for block in iter(lambda: stream.read(1 << 20), b''):
            digest.update(block)
    return digest.hexdigest()


def hash_files(root: str, paths: Iterable[str]) -> str:
    """Combined SHA-256 over relative `paths` (names and contents, in the given order)."""
    digest = hashlib.sha256()
    for path in paths:
        digest.update(path.replace(os.sep, '/').encode())
        digest.update(b'\0')
        digest.update(file_digest(os.path.join(root, path)).encode())
        digest.update(b'\n')
    return digest.hexdigest()


def hash_values(*values: str) -> str:
    """SHA-256 over a sequence of strings (e.g., dependency hashes)."""
    digest = hashlib.sha256()
    for value in values:
        digest.update((value or '').encode())
        digest.update(b'\n')
    return digest.hexdigest()


def relative(root: str, paths: List[str]) -> List[str]:
    """Paths relative to `root`."""
    return [os.path.relpath(path, root) for path in paths]
