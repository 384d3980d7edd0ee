# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Unit tests for run directory helpers."""


# standard libs
import os
import json

# external libs
import pytest

# internal libs
from casecontrol.harness.artifacts import (staging, write_json, write_csv, format_value, file_digest, hash_files,
                                           hash_values, fit_dir, perturbed_path, metrics_path)


class TestPaths:
    """Unit tests for run-relative paths."""

    def test_layout(self) -> None:
        assert perturbed_path(3, 7, 15, 40) == os.path.join('datasets', 'c03', 'r0007', 's15t40', 'dataset.jsonl')
        assert fit_dir(3, 7, 15, 40, 'shared') == os.path.join('fits', 'c03', 'r0007', 's15t40', 'shared')
        assert metrics_path(0, 0, 50, 200) == os.path.join('metrics', 'c00', 'r0000', 's50t200', 'metrics.json')


class TestStaging:
    """Unit tests for `staging`."""

    def test_file_replaced(self, tmp_path) -> None:
        target = os.path.join(tmp_path, 'out', 'value.txt')
        with staging(target) as temp:
            with open(temp, mode='w') as stream:
                stream.write('new')
        with open(target) as stream:
            assert stream.read() == 'new'
        assert os.listdir(os.path.dirname(target)) == ['value.txt']

    def test_directory_replaced(self, tmp_path) -> None:
        target = os.path.join(tmp_path, 'fit')
        os.makedirs(target)
        with open(os.path.join(target, 'old.npy'), mode='w') as stream:
            stream.write('old')
        with staging(target) as temp:
            os.makedirs(temp)
            with open(os.path.join(temp, 'fit.json'), mode='w') as stream:
                stream.write('{}')
        assert os.listdir(target) == ['fit.json']

    def test_failure_leaves_nothing(self, tmp_path) -> None:
        target = os.path.join(tmp_path, 'value.txt')
        with pytest.raises(RuntimeError):
            with staging(target) as temp:
                with open(temp, mode='w') as stream:
                    stream.write('partial')
                raise RuntimeError('interrupted')
        assert os.listdir(tmp_path) == []


class TestWriters:
    """Unit tests for `write_json` and `write_csv`."""

    def test_json_sorted(self, tmp_path) -> None:
        target = os.path.join(tmp_path, 'metrics.json')
        write_json(target, {'b': 1, 'a': [1.5]})
        with open(target) as stream:
            text = stream.read()
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {'a': [1.5], 'b': 1}

    def test_csv(self, tmp_path) -> None:
        target = os.path.join(tmp_path, 'rows.csv')
        write_csv(target, ['x', 'y', 'z'], [{'x': 1, 'y': 0.1, 'z': True}, {'x': 2}])
        with open(target) as stream:
            assert stream.read() == 'x,y,z\n1,0.1,true\n2,,\n'

    def test_format_value(self) -> None:
        assert format_value(None) == ''
        assert format_value(False) == 'false'
        assert format_value(1 / 3) == '0.3333333333333333'
        assert format_value(float('nan')) == 'nan'


class TestHashing:
    """Unit tests for content hashes."""

    def test_file_digest(self, tmp_path) -> None:
        target = os.path.join(tmp_path, 'abc.txt')
        with open(target, mode='w') as stream:
            stream.write('abc')
        assert file_digest(target) == 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'

    def test_hash_files_sensitive(self, tmp_path) -> None:
        for name, text in [('a.txt', 'one'), ('b.txt', 'two')]:
            with open(os.path.join(tmp_path, name), mode='w') as stream:
                stream.write(text)
        forward = hash_files(tmp_path, ['a.txt', 'b.txt'])
        assert forward == hash_files(tmp_path, ['a.txt', 'b.txt'])
        assert forward != hash_files(tmp_path, ['b.txt', 'a.txt'])
        with open(os.path.join(tmp_path, 'b.txt'), mode='w') as stream:
            stream.write('three')
        assert forward != hash_files(tmp_path, ['a.txt', 'b.txt'])

    def test_hash_values(self) -> None:
        assert hash_values('a', 'b') != hash_values('ab')
        assert hash_values('a', None) == hash_values('a', '')
