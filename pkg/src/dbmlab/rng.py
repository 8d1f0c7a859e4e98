"""Counter-based random substreams.

Every Monte Carlo sample draws from its own generator, keyed by the pair
``(master_seed, sample_index)``.  The key is hashed by :class:`numpy.random.SeedSequence`,
so streams are reproducible and independent regardless of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    sample_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.sample_index < 0:
            raise ValueError("sample_index must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.sample_index,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, tag: int) -> "RngStream":
        """Derive a stream for a sub-purpose (e.g. the GOE half of a paired sample)."""
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.sample_index, tag))
        return RngStream(int(ss.generate_state(1, np.uint64)[0]), 0)


def stream(master_seed: int, sample_index: int = 0) -> np.random.Generator:
    return RngStream(master_seed, sample_index).generator()
