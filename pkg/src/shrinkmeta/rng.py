"""Counter-seeded random streams: SplitMix64 seeding a xoshiro256++ generator.

Every replication owns a stream that is a pure function of
``(master_seed, index)``, so results never depend on execution order.
"""
from .numerics import std_normal_quantile

__all__ = ["MASK64", "splitmix64", "SplitMix64", "RngStream", "derive_seed"]

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TWO_M53 = 2.0 ** -53


def _mix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        self.state = (self.state + _GOLDEN) & MASK64
        return _mix(self.state)


def splitmix64(seed):
    """First SplitMix64 output for a generator started at ``seed``."""
    return _mix((seed + _GOLDEN) & MASK64)


def derive_seed(seed, index):
    return splitmix64((seed ^ index) & MASK64)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


class RngStream:
    """xoshiro256++ with helpers for uniforms and standard normals."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, state):
        s0, s1, s2, s3 = (int(v) & MASK64 for v in state)
        if not (s0 | s1 | s2 | s3):
            raise ValueError("xoshiro256++ state must not be all zero")
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3

    @classmethod
    def from_seed(cls, seed):
        sm = SplitMix64(seed)
        return cls([sm.next() for _ in range(4)])

    @classmethod
    def for_replication(cls, master_seed, r):
        return cls.from_seed((master_seed ^ r) & MASK64)

    def next_u64(self):
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s0 + s3) & MASK64, 23) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self):
        """Uniform double on the open interval (0, 1)."""
        return ((self.next_u64() >> 11) + 0.5) * _TWO_M53

    def normal(self):
        """Standard normal by inversion of one uniform."""
        return std_normal_quantile(self.uniform())
