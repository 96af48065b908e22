"""Deterministic randomness built on SplitMix64.

SplitMix64 (Steele, Lea and Flood, 2014) advances a 64-bit Weyl counter by
GAMMA and scrambles it with a murmur-style finalizer:

    state   = (state + 0x9E3779B97F4A7C15) mod 2^64
    z       = state
    z       = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9   mod 2^64
    z       = (z ^ (z >> 27)) * 0x94D049BB133111EB   mod 2^64
    output  = z ^ (z >> 31)

Every draw is a pure function of the counter, which buys three things: the
compiled kernels and the pure-numpy fallback reproduce identical streams bit
for bit, blocks of draws can be generated vectorized from a counter range, and
child streams derive from documented arithmetic instead of shared mutable
state (``derive_seed``), so parallel schedules cannot reorder anything.

Bounded integers use ``output % n``. For the n used anywhere in this package
(n <= 2^32) the modulo bias is below 2^-32 per draw, which is irrelevant next
to the statistical noise of the experiments; what matters here is that both
kernel backends compute the identical value.
"""

from __future__ import annotations

import numpy as np

from .errors import UsageError

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX_B = 0xBF58476D1CE4E5B9
MIX_C = 0x94D049BB133111EB

# 53-bit mantissa: (z >> 11) * 2^-53 is uniform on [0, 1)
_UNIT = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_B) & MASK64
    z = ((z ^ (z >> 27)) * MIX_C) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Child seed for stream `index` of a master seed.

    Defined as mix64(seed + GAMMA * (index + 1)); used for per-tree,
    per-node and per-cell streams so results are schedule independent.
    """
    return mix64((seed + GAMMA * (index + 1)) & MASK64)


def _mix64_array(states: np.ndarray) -> np.ndarray:
    z = states.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(MIX_B)
    z ^= z >> np.uint64(27)
    z *= np.uint64(MIX_C)
    z ^= z >> np.uint64(31)
    return z


class Rng:
    """SplitMix64 stream with numpy-friendly block draws.

    The same seed always reproduces the same sequence of uniforms and
    integers, and block draws consume exactly the same counter values as the
    equivalent sequence of scalar draws.
    """

    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)):
            raise UsageError(f"seed must be an integer, got {type(seed).__name__}")
        if not 0 <= int(seed) <= MASK64:
            raise UsageError(f"seed must fit in 64 bits, got {seed}")
        self.seed = int(seed)
        self._state = int(seed)

    def next_u64(self) -> int:
        self._state = (self._state + GAMMA) & MASK64
        return mix64(self._state)

    def _block(self, k: int) -> np.ndarray:
        start = self._state
        counters = (
            np.uint64(start)
            + np.uint64(GAMMA) * np.arange(1, k + 1, dtype=np.uint64)
        )
        self._state = (start + GAMMA * k) & MASK64
        return _mix64_array(counters)

    def uniform(self, size: int | None = None):
        """Uniform float64 draws on [0, 1)."""
        if size is None:
            return (self.next_u64() >> 11) * _UNIT
        z = self._block(int(size))
        return (z >> np.uint64(11)).astype(np.float64) * _UNIT

    def integers(self, n: int, size: int | None = None):
        """Uniform integers on [0, n)."""
        if n <= 0:
            raise UsageError(f"integers() needs n >= 1, got {n}")
        if size is None:
            return self.next_u64() % n
        z = self._block(int(size))
        return (z % np.uint64(n)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of arange(n), one bounded draw per step."""
        out = np.arange(n, dtype=np.int64)
        for i in range(n - 1):
            j = i + self.integers(n - i)
            out[i], out[j] = out[j], out[i]
        return out

    def child(self, index: int) -> "Rng":
        """Independent stream derived from this stream's seed (not its state)."""
        return Rng(derive_seed(self.seed, index))
