"""Deterministic, platform-independent random streams.

All randomness flows through counter-based Philox generators keyed by
``(seed, *key parts)``.  String tags are folded in via CRC32 so stream
identity never depends on Python's salted hash.  Streams derived from the
same key are identical regardless of thread or process scheduling.
"""

from __future__ import annotations

import zlib

import numpy as np


def _fold(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFFFFFFFFFF


def stream(seed: int, *key: int | str) -> np.random.Generator:
    """Generator for the stream keyed by ``(seed, *key)``."""
    entropy = [_fold(seed)] + [_fold(p) for p in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
