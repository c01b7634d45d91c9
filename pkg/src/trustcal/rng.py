"""Portable seeded generator used for shuffles, exploration draws and weight init.

SplitMix64 (Steele, Lea & Flood 2014) is a 64-bit counter-based generator
with published constants. Everything here is pure integer arithmetic, so a
given seed yields the same stream on every platform and Python version.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "splitmix64"
VERSION = 1

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MUL1) & _MASK
        z = ((z ^ (z >> 27)) * _MUL2) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection on the top bits."""
        if n <= 0:
            raise ValueError("n must be positive")
        if n == 1:
            return 0
        bits = (n - 1).bit_length()
        while True:
            v = self.next_u64() >> (64 - bits)
            if v < n:
                return v

    def uniform(self, low: float, high: float, size: int) -> np.ndarray:
        return np.array([low + (high - low) * self.random() for _ in range(size)])

    def normal(self) -> float:
        """Standard normal draw (Box-Muller, one value per call)."""
        u1 = 1.0 - self.random()  # (0, 1]
        u2 = self.random()
        return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))


def shuffle(n: int, seed: int) -> list[int]:
    """Fisher-Yates permutation of ``range(n)`` driven by SplitMix64(seed)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    perm = list(range(n))
    gen = SplitMix64(seed)
    for i in range(n - 1, 0, -1):
        j = gen.randbelow(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def derive_seed(seed: int, stream: int) -> int:
    """Decorrelated child seed, so one run can own several independent streams."""
    return SplitMix64((int(seed) ^ (int(stream) * _MUL2)) & _MASK).next_u64()
