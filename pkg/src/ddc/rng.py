"""Counter-based random streams addressed by integer paths.

A stream is identified by ``(seed, *path)``; e.g. the noise at step k of
sub-experiment i in Monte Carlo trial t is ``(seed, t, 1, i, k)``.  Streams
never depend on how many draws other streams have consumed, so trials can
run in any order or in parallel.
"""

from __future__ import annotations

import numpy as np


def _entropy(seed: int, path) -> list[int]:
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for p in path:
        if p < 0:
            raise ValueError(f"stream path entries must be nonnegative, got {p}")
        words.append(int(p))
    return words


def keyed_generator(seed: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(_entropy(seed, path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """A 63-bit child seed, stable across platforms."""
    ss = np.random.SeedSequence(_entropy(seed, path))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def stream_key(seed: int, *path: int) -> np.ndarray:
    """128-bit Philox key for the stream ``(seed, *path)``."""
    return np.random.SeedSequence(_entropy(seed, path)).generate_state(2, np.uint64)


def counter_generator(key: np.ndarray, index: int) -> np.random.Generator:
    """Generator for draw ``index`` of a keyed stream (high counter word = index)."""
    counter = np.array([0, 0, 0, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
