"""Portable seeded randomness for reproducible dataset sampling.

Python's ``random`` module only guarantees stream stability for ``random()``
itself, and numpy's Generator distributions have changed across releases.
Dataset bytes must be identical across platforms and interpreter versions,
so sampling runs on SplitMix64: a public-domain 64-bit generator small
enough to pin here forever.
"""

from __future__ import annotations

import hashlib
from typing import Sequence, TypeVar

_MASK = (1 << 64) - 1

T = TypeVar("T")


class SplitMix64:
    """SplitMix64 stream (Steele, Lea & Flood's splittable generator finalizer)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def sample(self, items: Sequence[T], k: int) -> list[T]:
        """k items without replacement, by partial Fisher-Yates shuffle."""
        if k > len(items):
            raise ValueError(f"cannot sample {k} from {len(items)} items")
        pool = list(items)
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def stream_for(seed: int, key: str) -> SplitMix64:
    """Per-key stream: seed XOR a stable 64-bit hash of the key.

    Keying streams by entity id keeps each entity's draw independent of
    iteration order elsewhere in the dataset build.
    """
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return SplitMix64(seed ^ int.from_bytes(digest, "big"))


def stable_hash64(key: str) -> int:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")
