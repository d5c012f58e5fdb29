"""Counter-based, splittable random streams.

Every independent unit of work (a trajectory, a batch of samples) gets its own
``Philox`` stream derived from ``SeedSequence(seed, spawn_key=(index,))``, so a
result never depends on which worker produced it.
"""

from typing import List, Sequence, Tuple

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``seed`` and spawn key ``key``."""
    spawn_key: Tuple[int, ...] = tuple(int(k) for k in key)
    ss = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))


def batch_sizes(total: int, batch: int) -> List[int]:
    """Split ``total`` samples into fixed-size batches (the last may be short)."""
    if total <= 0:
        return []
    full, rest = divmod(total, batch)
    sizes = [batch] * full
    if rest:
        sizes.append(rest)
    return sizes


def seed_token(seed: int, key: Sequence[int] = ()) -> int:
    """64-bit token identifying a stream, stored on sampled objects."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_seed(seed: int, *key: int) -> int:
    """An independent seed for a sub-experiment (e.g. the SDE side of a comparison)."""
    return seed_token(seed, key) >> 1
