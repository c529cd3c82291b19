"""Deterministic random streams for structure sampling.

Discrete draws (uniform starts, local-search randomness) run on a small
counter-based splitmix64 stream so that the pure-Python sampler and the
compiled training path produce bit-identical sequences. Continuous draws
(Gaussian parameters, perturbations) use numpy generators seeded from the
same integers.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """One splitmix64 output step on a 64-bit state."""
    z = (z + _GOLDEN) & MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def derive_key(seed: int, *indices: int) -> int:
    """Derive an independent stream key from a seed and index path.

    Keys for distinct index paths are decorrelated, so draws keyed by
    (sample, draw) indices do not depend on processing order.
    """
    key = mix64(seed & MASK64)
    for idx in indices:
        key = mix64(key ^ ((idx + 1) * _GOLDEN & MASK64))
    return key


class Stream:
    """Seeded splitmix64 stream of unbiased uniform integers."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        z = self.state
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & MASK64
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & MASK64
        z ^= z >> 31
        return z

    def uniform_index(self, n: int) -> int:
        """Unbiased uniform draw from {0, ..., n-1} by rejection."""
        if n <= 0:
            raise ValueError("uniform_index needs a positive range")
        threshold = ((1 << 64) // n) * n
        while True:
            x = self.next_u64()
            if x < threshold:
                return x % n

    def spawn(self, index: int) -> "Stream":
        """Independent child stream; children commute with draw order."""
        return Stream(derive_key(self.state, index))
