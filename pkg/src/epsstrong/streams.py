"""Counter-based random streams, one per (seed, index) pair.

A replicate's draws depend only on its own key, so results do not depend on
how replicates are spread over workers.
"""

import numpy as np

_MASK = (1 << 64) - 1


def stream(seed: int, index: int) -> np.random.Generator:
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be nonnegative")
    key = np.array([index & _MASK, seed & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
