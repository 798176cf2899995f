"""Seed streams.

Every random draw in the package goes through ``numpy.random.Generator``
backed by PCG64, seeded from a ``numpy.random.SeedSequence``. A stream is
identified by a master seed plus a tuple of non-negative integers (cell id,
trial id, stream tag, ...), so a trial's randomness never depends on which
other trials ran before it or on scheduling order.
"""

import zlib

import numpy as np

# fixed stream tags so independent draws inside one trial never collide
MODEL = 0
WEDGE = 1
UNIFORM = 2
EVAL = 3
PROBE = 4
INIT_UNIFORM = 5


def stream(seed, *key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))


def seed_sequence(seed, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def derive_seed(seed, *key) -> int:
    """A 63-bit integer seed for the stream ``(seed, *key)``."""
    return int(seed_sequence(seed, *key).generate_state(2, np.uint32).view(np.uint64)[0] >> np.uint64(1))


def as_generator(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(seed_or_rng)


def tag(name: str) -> int:
    """Stable integer for a string label (experiment ids in stream keys)."""
    return zlib.crc32(name.encode())
