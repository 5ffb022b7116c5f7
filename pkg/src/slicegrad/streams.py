"""Deterministic RNG substreams.

Every random draw in the package comes from a generator derived from a
master seed plus a tuple of labels, e.g. ``substream(seed, "slrg", 1000, 17)``.
Labels may be ints or strings; strings are hashed with CRC32 so the mapping
is stable across Python processes (unlike ``hash``).  Because a task's
stream depends only on its labels, results do not depend on how tasks are
scheduled across threads.
"""

import zlib

import numpy as np


def _label_key(label):
    if isinstance(label, (bool, np.bool_)):
        return int(label)
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"integer stream labels must be >= 0, got {label}")
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def substream(seed, *labels):
    """Return a fresh ``np.random.Generator`` for ``(seed, *labels)``."""
    key = tuple(_label_key(lab) for lab in labels)
    ss = np.random.SeedSequence(int(seed) % (1 << 64), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng):
    """Accept a Generator, a SeedSequence or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(rng))
    if rng is None:
        raise ValueError("an explicit RNG or seed is required")
    return substream(int(rng))
