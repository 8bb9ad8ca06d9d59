"""Deterministic random number generation.

Everything that needs randomness (train/val splits, sampling noise) runs on
splitmix64 so that results are bit-identical across platforms and
implementations. Python's own ``random`` module is deliberately not used on
these paths.

Definitions fixed by this module:

* splitmix64: the standard finalizer-based generator (Steele et al.),
  64-bit wrapping arithmetic.
* unit doubles: ``((z >> 11) + 1) * 2**-53``, in (0, 1] so ``log`` is safe.
* gaussians: Box-Muller, one value per pair of unit doubles
  (``sqrt(-2 ln u1) * cos(2 pi u2)``; the sine branch is discarded).
* shuffles: Fisher-Yates driven by ``next_u64() % (i + 1)``, swapping from
  the back of the list. Modulo bias is accepted; determinism is the point.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1


class SplitMix64:
    """splitmix64 stream seeded with a 64-bit integer."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        """Uniform double in (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * 2.0 ** -53

    def next_gaussian(self) -> float:
        """Standard normal draw (Box-Muller, cosine branch only)."""
        u1 = self.next_unit()
        u2 = self.next_unit()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]
