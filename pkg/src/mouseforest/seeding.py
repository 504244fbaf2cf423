"""Named random streams derived from one root seed.

Every random draw in the package comes from a generator built here, keyed by
the root seed plus a path of names and integers, e.g.
``rng_for(seed, "baseline", tree_index)``.  Two calls with the same key give
identical streams regardless of process, thread count or call order.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream key integers must be non-negative")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"unsupported stream key component: {part!r}")


def seed_sequence(root_seed: int, *names) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(root_seed), spawn_key=tuple(_key_part(n) for n in names))


def rng_for(root_seed: int, *names) -> np.random.Generator:
    """Generator for the stream ``(root_seed, *names)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(root_seed, *names)))


def child_seed(root_seed: int, *names) -> int:
    """A 63-bit integer seed for the named stream, for APIs that want an int."""
    return int(seed_sequence(root_seed, *names).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
