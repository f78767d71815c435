"""Counter-based random streams keyed on (master seed, stream id)."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class RngStream:
    """A reproducible random stream backed by the Philox counter-based generator.

    The Philox key is derived from ``(master_seed, stream_id, *tags)`` through
    :class:`numpy.random.SeedSequence`, so streams with different ids are
    statistically independent and a stream rebuilt from the same key replays the
    same draws.  ``child`` derives sub-streams (graph, dynamics, landmarks, ...)
    without consuming draws from the parent.
    """

    __slots__ = ("master_seed", "stream_id", "tags", "generator")

    def __init__(self, master_seed: int, stream_id: int = 0, tags: tuple[int, ...] = ()):
        if not 0 <= master_seed <= _MASK64 or not 0 <= stream_id <= _MASK64:
            raise ValueError("seed and stream id must be unsigned 64-bit integers")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.tags = tuple(int(t) for t in tags)
        entropy = [self.master_seed, self.stream_id, *self.tags]
        key = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def child(self, *tags: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id, self.tags + tuple(tags))

    def replay(self) -> "RngStream":
        """Fresh copy positioned at the start of this stream."""
        return RngStream(self.master_seed, self.stream_id, self.tags)

    # thin pass-throughs used throughout the package
    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id}, tags={self.tags})"


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


# Sub-stream tags. Fixed integers so manifests can name them.
GRAPH = 1
INIT = 2
DYNAMICS = 3
LANDMARKS = 4
LIFT = 5
COARSE = 6


def derive_seed(master_seed: int, *tags: int) -> int:
    """A 64-bit seed for a sub-object (e.g. the graph of realization j)."""
    state = np.random.SeedSequence([int(master_seed), *map(int, tags)]).generate_state(1, np.uint64)
    return int(state[0])
