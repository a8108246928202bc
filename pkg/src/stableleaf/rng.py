"""Deterministic 64-bit generator with splittable substreams.

All seeded sampling in the package goes through this generator so runs are
bit-reproducible across platforms: state updates are pure 64-bit integer
arithmetic (additive lag 0x9E3779B97F4A7C15 followed by the splitmix64
finalizer) and uniform doubles are built from the top 53 bits, so no libm or
platform RNG is involved.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # 2^64 / golden ratio, odd


def _mix(z: int) -> int:
    # splitmix64 finalizer
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitRng:
    """Counter-style generator: next() advances by _GAMMA and finalizes."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform double in [lo, hi) from the top 53 bits."""
        u = (self.next_u64() >> 11) * (2.0 ** -53)
        return lo + (hi - lo) * u

    def point_in_box(self, cx: float, cy: float, r: float) -> tuple[float, float]:
        return (self.uniform(cx - r, cx + r), self.uniform(cy - r, cy + r))

    def randint(self, n: int) -> int:
        """Integer in [0, n) via the multiply-shift reduction."""
        return (self.next_u64() * n) >> 64

    def substream(self, index: int) -> "SplitRng":
        """Independent stream keyed by (current seed, index); does not consume state."""
        return SplitRng(_mix(self._state ^ _mix(index & _MASK)))
