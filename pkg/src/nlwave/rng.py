"""Pinned pseudo-random stream for reproducible experiments.

The generator is xorshift64* seeded through one splitmix64 scramble, so
any 64-bit seed (including 0) yields a healthy nonzero state.  Uniform
doubles take the top 53 bits: u = (x >> 11) * 2**-53, giving [0, 1).
Gaussians come from Box-Muller on (1 - u, u') pairs; the second deviate
of each pair is cached and served next, so draw order is part of the
pinned algorithm.  Everything here is plain integer arithmetic, which
keeps streams byte-identical across platforms.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_MULT = 2685821657736338717  # xorshift64* output multiplier


def splitmix64(x: int) -> int:
    """One splitmix64 step: returns the scrambled value of x."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class Rng:
    """xorshift64* stream with Box-Muller normals."""

    def __init__(self, seed: int):
        state = splitmix64(int(seed) & _MASK)
        if state == 0:
            # xorshift has a fixed point at 0; splitmix64 maps exactly one
            # seed there, park that seed on an arbitrary odd constant
            state = 0x9E3779B97F4A7C15
        self._state = state
        self._spare: float | None = None

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * _MULT) & _MASK

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] (inclusive), via rejection-free modulo.

        Ranges here are tiny (matrix sizes, indices), so modulo bias is
        far below anything observable.
        """
        span = hi - lo + 1
        return lo + self.next_u64() % span

    def normal(self) -> float:
        """Standard normal via Box-Muller, serving cached spares in order."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.uniform()  # (0, 1], keeps log finite
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)], dtype=float)

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)], dtype=float)
