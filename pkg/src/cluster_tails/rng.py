"""Counter-based random number streams.

Every sampler in the package takes an explicit :class:`RngStream`, so callers
own all mutable state.  Streams are backed by the Philox counter-based bit
generator keyed by ``(seed, stream_id)``: two streams with distinct ids under
the same seed are statistically independent, and identical ``(seed,
stream_id)`` pairs reproduce identical draws bit for bit regardless of what
other streams were consumed in between.

Batch operations partition work into fixed-size chunks and draw each chunk
from ``stream.child(chunk_index)``, which is what makes results independent
of the worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_CHILD_SPAN = 1 << 32


@dataclass
class RngStream:
    """One reproducible substream of the global experiment seed.

    ``stream_id`` values below 2**32 are "root" streams; :meth:`child`
    derives per-chunk streams from a root by packing the chunk index into
    the low 32 bits, so the two-level hierarchy never collides.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0 <= self.stream_id < 2**64:
            raise ValueError("stream_id must be a 64-bit unsigned integer")

    @property
    def generator(self) -> np.random.Generator:
        """The live numpy generator for this stream (created on first use)."""
        if self._gen is None:
            key = np.array([self.seed, self.stream_id], dtype=np.uint64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def child(self, index: int) -> "RngStream":
        """Fresh stream for chunk ``index`` of a batch run on this stream."""
        if self.stream_id >= _CHILD_SPAN:
            raise ValueError("child streams cannot be nested twice")
        if not 0 <= index < _CHILD_SPAN:
            raise ValueError("child index out of range")
        return RngStream(self.seed, self.stream_id * _CHILD_SPAN + index)

    def fresh(self) -> "RngStream":
        """A copy with untouched generator state (for repeatable replays)."""
        return RngStream(self.seed, self.stream_id)
