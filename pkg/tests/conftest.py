# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Shared test configuration."""


# standard libs
import os

# external libs
import pytest


def pytest_collection_modifyitems(config: pytest.Config, items: list) -> None:
    """Skip study reproductions unless CASECONTROL_STUDY is set."""
    if os.getenv('CASECONTROL_STUDY'):
        return
    skip = pytest.mark.skip(reason='study reproduction (set CASECONTROL_STUDY=1 to run)')
    for item in items:
        if 'study' in item.keywords:
            item.add_marker(skip)
