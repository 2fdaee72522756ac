"""Deterministic seeded randomness shared by every stage.

All randomness in the pipeline flows through SplitMix64 so that outputs are
reproducible across runs, machines, and implementations.  Nothing here ever
touches OS entropy or wall-clock time.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(seed: int, salt: int) -> int:
    """Derive a sub-seed: the (salt+1)-th raw output of the stream at ``seed``.

    Used for per-step chain seeds and per-tree forest seeds, so that a single
    top-level seed fans out into independent deterministic streams.
    """
    return _finalize((seed + _GAMMA * ((salt & MASK64) + 1)) & MASK64)


class SplitMix64:
    """Sequential SplitMix64 generator over a 64-bit state."""

    def __init__(self, seed: int) -> None:
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        return _finalize(self._state)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo reduction; bias is negligible for
        the small ranges used here and keeps the draw sequence portable."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, k: int) -> list:
        """k distinct items via partial Fisher-Yates; k == len gives a full
        permutation. Draw order is part of the determinism contract."""
        n = len(items)
        if k > n:
            raise ValueError(f"sample size {k} exceeds population {n}")
        pool = list(items)
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
