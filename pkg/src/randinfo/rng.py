"""Seeded random streams.

A stream is identified by ``(seed, stream_id)``.  Both are folded into a
numpy ``SeedSequence`` so that distinct stream ids give statistically
independent generators and the same pair always replays the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of the stream."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """Sub-stream, for partitioning work without touching this stream."""
        mixed = (self.stream_id * 0x9E3779B97F4A7C15 + int(index) + 1) & _MASK64
        return RngStream(self.seed ^ 0xD1B54A32D192ED03, mixed)


def as_generator(rng) -> np.random.Generator:
    """Accept an ``RngStream``, a ``Generator`` or an integer seed."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngStream(int(rng)).generator()
