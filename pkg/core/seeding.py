# core/seeding.py
"""
Named random streams derived from one master seed.

A stream is identified by a path of names, e.g. ("oram", "level0") or
("supermarket", "trial", "17"). Each name is hashed with CRC-32 and the
resulting integers form the spawn key of a numpy SeedSequence rooted at the
master seed. The derivation is stable across processes and platforms, so any
single component of an experiment can be reproduced in isolation.
"""
import zlib
from typing import Union

import numpy as np

Name = Union[str, int]


def spawn_key(*names: Name) -> tuple:
    return tuple(zlib.crc32(str(name).encode("utf-8")) for name in names)


def derive_seed_sequence(master_seed: int, *names: Name) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=spawn_key(*names))


def derive_rng(master_seed: int, *names: Name) -> np.random.Generator:
    return np.random.default_rng(derive_seed_sequence(master_seed, *names))
