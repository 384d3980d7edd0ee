# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Derive independent random streams from a master seed and stable keys."""


# type annotations
from __future__ import annotations
from typing import Any, Union

# standard libs
import json
import hashlib

# external libs
import numpy as np

# public interface
__all__ = ['stable_hash', 'derive_seed', 'derive_rng', 'SeedLike', ]


SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def stable_hash(value: Any, digits: int = 8) -> int:
    """
    Integer hash of a JSON-serializable `value` that is stable across processes.

    Python's builtin `hash` is salted per process and cannot be used to derive seeds.
    """
    text = json.dumps(value, sort_keys=True, separators=(',', ':'))
    return int(hashlib.sha256(text.encode()).hexdigest()[:digits * 2], 16)


def derive_seed(seed: int, *keys: Union[int, str]) -> np.random.SeedSequence:
    """Seed sequence for the stream named by `keys` under master `seed`."""
    entropy = [int(seed)] + [key if isinstance(key, int) else stable_hash(key) for key in keys]
    return np.random.SeedSequence(entropy)


def derive_rng(seed: int, *keys: Union[int, str]) -> np.random.Generator:
    """Generator for the stream named by `keys` under master `seed`."""
    return np.random.default_rng(derive_seed(seed, *keys))
