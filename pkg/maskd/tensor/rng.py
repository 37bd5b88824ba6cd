"""Counter-based PRNG streams.

Every stream is a Philox generator keyed by ``SeedSequence(seed, spawn_key=key)``,
so the stream for (seed, key) is the same no matter which other streams were
drawn before it or on which worker.
"""

import numpy as np


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``seed`` and a tuple of integer stream ids."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))
