"""SplitMix64 stream used for every random draw, so runs are reproducible across ports.

state <- state + 0x9E3779B97F4A7C15 (mod 2^64)
z <- (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
z <- (z ^ (z >> 27)) * 0x94D049BB133111EB
out <- z ^ (z >> 31)

Uniform doubles take the top 53 bits: (out >> 11) * 2^-53.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)])


def random_test_polynomial(seed: int, degree: int = 8) -> np.ndarray:
    """Unit-norm coefficients over e_0..e_degree, real and imaginary parts uniform on [-1, 1)."""
    gen = SplitMix64(seed)
    u = gen.uniforms(2 * (degree + 1)) * 2.0 - 1.0
    c = u[0::2] + 1j * u[1::2]
    return c / np.linalg.norm(c)
