"""Seeded, splittable random streams.

Every sampler in the package takes an explicit stream so that Monte Carlo
batches are reproducible and can be farmed out over disjoint ``stream_id``
values without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

#: Recorded in every report so that numeric payloads can be regenerated.
PRNG_ALGORITHM = f"numpy.random.PCG64 via SeedSequence(seed, spawn_key=(stream_id,)); numpy {np.__version__}"

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A ``(seed, stream_id)`` pair naming one independent PCG64 stream.

    Two streams with the same pair produce identical draws; streams that
    differ in ``stream_id`` are decorrelated through ``SeedSequence``.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of the stream."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """Derived stream for sub-batch ``index``, disjoint from ``self``."""
        mixed = np.random.SeedSequence([int(self.stream_id), int(index)], spawn_key=(0xB10C,))
        return RngStream(self.seed, int(mixed.generate_state(1, np.uint64)[0]))


RngLike = Union[RngStream, np.random.Generator, int]


def as_generator(rng: RngLike) -> np.random.Generator:
    """Accept a stream, a ready generator or a bare integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")
