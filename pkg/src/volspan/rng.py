"""Named, counter-based random streams.

Every random draw in the package comes from ``stream(seed, "module:purpose", ...)``.
Streams are Philox generators keyed by the seed and a spawn key derived from
the names, so two streams never overlap and adding a new consumer does not
perturb existing ones.
"""
import zlib

import numpy as np


def _key(part):
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed, *names):
    """Return an independent ``numpy.random.Generator`` for ``(seed, *names)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(_key(n) for n in names))
    return np.random.Generator(np.random.Philox(ss))
