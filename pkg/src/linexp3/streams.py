"""Keyed random streams.

Every consumer of randomness gets its own generator derived from the master
seed and a key (purpose, replication[, round]). Adding draws to one purpose
therefore never shifts the draws seen by another.
"""

import numpy as np

CONTEXT = 0
ACTION = 1
MGR = 2
GHOST = 3
SCRIPT = 4


def stream(seed: int, purpose: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(purpose,) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
