"""Deterministic named RNG streams derived from a single master seed.

Every source of randomness in a run (data generation, model init, client
sampling, per-client per-round shuffles, probe batches) draws from its own
stream keyed by name and counters.  Streams are mutually independent, so
results do not depend on the order in which clients are processed, and any
round can be replayed in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(master_seed: int, *key: int | str) -> np.random.Generator:
    """Return the generator identified by ``(master_seed, *key)``.

    String key parts are hashed so stream names cannot collide with integer
    counters.  The same key always yields a generator in the same state.
    """
    if master_seed < 0:
        raise ValueError(f"master seed must be nonnegative, got {master_seed}")
    entropy = [int(master_seed)]
    for part in key:
        if isinstance(part, str):
            digest = hashlib.sha256(part.encode("utf-8")).digest()
            entropy.append(int.from_bytes(digest[:8], "big"))
        else:
            entropy.append(int(part))
    return np.random.default_rng(np.random.SeedSequence(entropy))
