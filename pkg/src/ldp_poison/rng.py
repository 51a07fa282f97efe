"""Counter-based random streams.

Every random decision in the protocol is a pure function of
``(root seed, purpose tag, index...)``, so results do not depend on the order
in which rows or pairs are evaluated, nor on how work is split across workers.
Attack planning, which needs sequential sampling without replacement, uses
ordinary numpy generators seeded from the same key material.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / (1 << 53)


def stream_key(root: int, tag: str) -> np.uint64:
    """64-bit key for the sub-stream ``tag`` of seed ``root``."""
    digest = hashlib.blake2b(f"{int(root)}:{tag}".encode(), digest_size=8).digest()
    return np.uint64(int.from_bytes(digest, "little"))


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash_uniform(key: np.uint64, *indices) -> np.ndarray:
    """Uniform draws in the open interval (0, 1), one per broadcast index tuple.

    Indices must be non-negative and below 2**32.  Indices are folded pairwise
    into 64-bit counters; each counter is one splitmix64 output.
    """
    with np.errstate(over="ignore"):
        idx = [np.asarray(i, dtype=np.uint64) for i in indices]
        z = np.uint64(key)
        while idx:
            word = idx.pop(0)
            if idx:
                word = (word << np.uint64(32)) | idx.pop(0)
            z = _mix(z + word * _GOLDEN)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53


def generator(root: int, tag: str, *extra: int) -> np.random.Generator:
    """A numpy Generator for sequential sampling under ``(root, tag, *extra)``."""
    words = [int(stream_key(root, tag))] + [int(e) for e in extra]
    return np.random.default_rng(np.random.SeedSequence(words))
