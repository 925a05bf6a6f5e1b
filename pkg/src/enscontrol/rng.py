"""Reproducible random streams with hash-derived substreams.

Every random decision in this package flows from an :class:`RngStream`.
A stream is identified by ``(master_seed, stream_id)``; equal identifiers
reproduce the identical draw sequence on any host, independent of thread
count or call order.  Substreams are derived by keyed hashing, so parallel
workers can be handed disjoint streams without coordination.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / (1 << 53)


def _mix64(x) -> np.ndarray:
    # splitmix64 increment-and-finalize, elementwise on uint64 arrays;
    # wraparound is the point, so overflow warnings are silenced
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _key_bytes(key) -> bytes:
    if isinstance(key, (bool, float)):
        raise TypeError(f"stream keys must be int or str, got {type(key).__name__}")
    if isinstance(key, (int, np.integer)):
        return b"i" + str(int(key)).encode()
    if isinstance(key, str):
        return b"s" + key.encode()
    raise TypeError(f"stream keys must be int or str, got {type(key).__name__}")


@dataclass(frozen=True)
class RngStream:
    """Identifier of one deterministic random stream.

    The stream itself is stateless: generators and uniform grids are
    recomputed from the identifier on demand, which is what makes draws
    order-independent and safe to share between workers.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")

    def child(self, *keys) -> "RngStream":
        """Derive a substream keyed by a sequence of ints and/or strings."""
        h = hashlib.blake2b(
            digest_size=8,
            key=(int(self.stream_id) & _MASK64).to_bytes(8, "little"),
        )
        for key in keys:
            kb = _key_bytes(key)
            h.update(len(kb).to_bytes(4, "little"))
            h.update(kb)
        return RngStream(self.master_seed, int.from_bytes(h.digest(), "little"))

    def generator(self) -> np.random.Generator:
        """Fresh numpy generator; identical identifiers give identical output."""
        seq = np.random.SeedSequence(
            (int(self.master_seed) & _MASK64, int(self.stream_id) & _MASK64)
        )
        return np.random.default_rng(seq)

    def _counter_key(self) -> np.uint64:
        master = np.uint64(int(self.master_seed) & _MASK64)
        stream = np.uint64(int(self.stream_id) & _MASK64)
        return np.uint64(_mix64(master ^ _mix64(stream)))

    def uniform_grid(self, count: int, width: int, start: int = 0) -> np.ndarray:
        """Counter-based uniforms in [0, 1), shape ``(count, width)``.

        Row ``d`` is the private substream of draw index ``start + d``:
        entry ``(d, c)`` depends only on the stream identifier and the flat
        counter ``(start + d) * width + c``, never on how many rows were
        requested before or after it.
        """
        key = self._counter_key()
        rows = np.arange(start, start + count, dtype=np.uint64)[:, None]
        cols = np.arange(width, dtype=np.uint64)[None, :]
        idx = rows * np.uint64(width) + cols
        h = _mix64(key ^ _mix64(idx))
        return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53
