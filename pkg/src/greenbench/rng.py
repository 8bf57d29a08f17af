"""Seed derivation and named noise streams.

Every noise source in a trial (encoder R, encoder L, lidar) draws from its own
stream so that adding draws to one source never shifts another. Stream seeds
come from a splitmix64 mix of (base seed, trial index, stream name).
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 output for state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def trial_seed(seed: int, trial: int) -> int:
    """Seed for trial ``trial`` of a run started with ``seed``."""
    return splitmix64((seed + trial) & _MASK)


def stream_seed(seed: int, name: str) -> int:
    return splitmix64(seed ^ zlib.crc32(name.encode()))


class NoiseStream:
    """Deterministic Gaussian source; draws are buffered in blocks for speed."""

    _BLOCK = 4096

    def __init__(self, seed: int, name: str = ""):
        self.name = name
        self._gen = np.random.Generator(np.random.PCG64(stream_seed(seed, name)))
        self._buf = np.empty(0)
        self._pos = 0

    def normal(self, sigma: float = 1.0) -> float:
        if self._pos >= self._buf.size:
            self._buf = self._gen.standard_normal(self._BLOCK)
            self._pos = 0
        value = self._buf[self._pos]
        self._pos += 1
        return float(value) * sigma


def trial_streams(seed: int, trial: int, names=("encoder_r", "encoder_l", "lidar")):
    """Independent named streams for one trial."""
    base = trial_seed(seed, trial)
    return {name: NoiseStream(base, name) for name in names}
