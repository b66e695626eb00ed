"""Seedable random streams.

Every trial owns a RandomSource.  Child streams are derived with
``seed_i = mix(master, stream_id)`` where ``mix`` is the SplitMix64
finalizer, and each stream drives a numpy Philox (counter-based) generator.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """SplitMix64 output finalizer on a 64-bit word."""
    x = (x + GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix(master: int, stream_id: int) -> int:
    """Split rule for child seeds."""
    return splitmix64((master & MASK64) ^ splitmix64(stream_id & MASK64))


def _stream_key(name) -> int:
    if isinstance(name, int):
        return name
    # stable across processes, unlike hash()
    out = 0
    for ch in str(name).encode():
        out = splitmix64(out ^ ch)
    return out


class RandomSource:
    """A single-owner random stream with exact bounded-integer draws."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & MASK64
        self.gen = np.random.Generator(np.random.Philox(key=self.seed))

    def child(self, *path) -> "RandomSource":
        seed = self.seed
        for name in path:
            seed = mix(seed, _stream_key(name))
        return RandomSource(seed)

    def randbelow(self, k: int) -> int:
        """Uniform integer in [0, k) for any positive Python int."""
        if k <= 0:
            raise ValueError("randbelow needs a positive bound")
        if k <= 1 << 63:
            return int(self.gen.integers(0, k))
        nbits = k.bit_length()
        nwords = (nbits + 63) // 64
        while True:
            words = self.gen.integers(0, 1 << 64, size=nwords, dtype=np.uint64)
            r = 0
            for w in words:
                r = (r << 64) | int(w)
            r >>= nwords * 64 - nbits
            if r < k:
                return r

    def weighted_index(self, weights) -> int:
        """Index i with probability weights[i] / sum(weights), exactly.

        ``weights`` are non-negative Python ints with a positive sum.  A
        single candidate consumes no randomness.
        """
        if len(weights) == 1:
            return 0
        total = sum(weights)
        r = self.randbelow(total)
        for i, w in enumerate(weights):
            if r < w:
                return i
            r -= w
        raise AssertionError("unreachable")

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def subset(self, pool_size: int, k: int) -> np.ndarray:
        """k distinct indices of range(pool_size), in random order."""
        if k > pool_size:
            raise ValueError("subset larger than pool")
        return self.gen.choice(pool_size, size=k, replace=False)

    def random(self, size=None):
        return self.gen.random(size)
