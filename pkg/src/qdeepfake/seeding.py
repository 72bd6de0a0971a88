"""Seeded random streams.

Every random draw in the package goes through :func:`stream`, which builds a
numpy ``Generator`` on the Philox-4x64 counter-based bit generator.  A stream is
keyed by an integer seed plus an optional path of integers or strings, so
independent consumers (layer initialisers, dropout masks, attack restarts, data
shuffles) never share state and the same key always replays the same numbers
on every platform numpy supports.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"stream key parts must be non-negative, got {part}")
    return int(part)


def stream(seed: int, *path: int | str) -> np.random.Generator:
    """Return a deterministic generator for ``(seed, *path)``."""
    entropy = [_key_part(seed), *(_key_part(p) for p in path)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
