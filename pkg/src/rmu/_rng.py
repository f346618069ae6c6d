"""Small splitmix64 generator shared by the simulators and the training kernels.

numpy's generators cannot be reproduced from compiled code without the numpy
C API, so every stochastic path in the package draws from this generator.
The compiled kernel carries a bit-for-bit copy of the same arithmetic.
"""
from __future__ import annotations

import hashlib

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
EVAL_SALT = 0x5DEECE66D2B1A7F3
INV_2_53 = 1.0 / 9007199254740992.0


def derive_seed(*parts) -> int:
    """Hash arbitrary parts (names, floats, ints) into a 64-bit seed."""
    text = "\x1f".join(repr(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * INV_2_53

    def randbelow(self, n: int) -> int:
        return int(self.random() * n)

    def choice_cum(self, cum) -> int:
        """Index into a cumulative distribution; the last entry absorbs rounding."""
        x = self.random()
        last = len(cum) - 1
        for i in range(last):
            if x < cum[i]:
                return i
        return last
