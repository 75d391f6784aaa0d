"""Immutable, splittable random tokens backed by numpy's counter-based Philox.

A :class:`RandomSource` never mutates. Drawing from it is a pure function of
``(seed, stream, counter)``; callers move forward with :meth:`RandomSource.advance`
or branch with :meth:`RandomSource.substream`. Parallel workers that derive their
own sources from a shared root therefore never race on generator state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix64(z: int) -> int:
    # splitmix64 finalizer
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RandomSource:
    seed: int
    stream: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "stream", "counter"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must be an integer in [0, 2**64), got {value!r}")

    def generator(self) -> np.random.Generator:
        """Fresh numpy generator positioned at the start of this token's stream.

        Two calls on equal tokens return generators producing identical sequences.
        """
        seq = np.random.SeedSequence([int(self.seed), int(self.stream), int(self.counter)])
        return np.random.Generator(np.random.Philox(seq))

    def advance(self, steps: int = 1) -> RandomSource:
        return RandomSource(self.seed, self.stream, (self.counter + steps) & _MASK64)

    def substream(self, index: int) -> RandomSource:
        """Child token for ``index`` (query, trial, proposal ...).

        The child id is hashed from (stream, counter, index) so children of
        different parents do not collide the way a plain XOR would.
        """
        child = _mix64(_mix64(self.stream ^ _mix64(self.counter + 0x9E3779B97F4A7C15)) + int(index) + 1)
        return RandomSource(self.seed, child, 0)

    def normal(self, shape) -> tuple[np.ndarray, RandomSource]:
        return self.generator().standard_normal(shape), self.advance()

    def uniform(self, shape) -> tuple[np.ndarray, RandomSource]:
        return self.generator().random(shape), self.advance()
