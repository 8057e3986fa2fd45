"""Deterministic seed derivation and a small portable RNG.

All scalar and text-level randomness in the pipeline flows through this
module so that outputs are byte-identical across runs, platforms, and
worker counts.  Per-record seeds are derived by hashing, never by drawing
from a shared stream, which keeps parallel execution order irrelevant.

The generator is splitmix64: tiny, well studied, and trivially stable
forever (unlike library RNG streams, which are only stable per release
series).  Bulk pixel noise uses numpy's counter-based Philox keyed by
these seeds instead; see distortions module.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def derive_seed(*parts: int | str) -> int:
    """Mix integers and strings into a single 64-bit seed.

    Stable across processes and platforms (blake2b of a canonical
    encoding).  Intended for per-record seeds: e.g.
    ``derive_seed(global_seed, image_id, "distort")``.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, int):
            h.update(b"i")
            h.update((part & _MASK64).to_bytes(8, "little"))
        elif isinstance(part, str):
            encoded = part.encode("utf-8")
            h.update(b"s")
            h.update(len(encoded).to_bytes(8, "little"))
            h.update(encoded)
        else:
            raise TypeError(f"cannot mix {type(part).__name__} into a seed")
    return int.from_bytes(h.digest(), "little")


class SplitMix64:
    """Deterministic 64-bit generator with a handful of drawing helpers."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        limit = ((1 << 64) // n) * n
        while True:
            value = self.next_u64()
            if value < limit:
                return value % n

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform float in [lo, hi) with 53-bit resolution."""
        unit = (self.next_u64() >> 11) * 2.0**-53
        return lo + unit * (hi - lo)

    def choice(self, seq):
        if not seq:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.randrange(len(seq))]
