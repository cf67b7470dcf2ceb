"""Counter-based random streams.

Every draw is a pure function of ``(master seed, year, submodel tag, entity key,
draw index)``, so results do not depend on iteration order, chunking, or the
number of worker threads. The mixing function is the SplitMix64 finalizer.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy import special

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def key_of(label: str) -> int:
    """Stable 64-bit key for an identifier string."""
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little")


def keys_of(labels) -> np.ndarray:
    return np.fromiter((key_of(str(s)) for s in labels), dtype=np.uint64, count=len(labels))


def _to_u64(x: int) -> np.ndarray:
    return np.array([x & _MASK64], dtype=np.uint64)


def bits_to_unit(bits: np.ndarray) -> np.ndarray:
    # 53 high bits, offset by half a ulp so the result is strictly inside (0, 1)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


class Streams:
    """Factory for keyed uniform draws under one master seed."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be nonnegative")
        self.seed = int(seed)
        self._root = _mix(_to_u64(self.seed) + _GOLDEN)

    def _base(self, year: int, tag: str) -> np.ndarray:
        h = _mix(self._root ^ _to_u64(int(year) + 0x632BE59BD9B4E019))
        return _mix(h ^ _to_u64(key_of(tag)))

    def uniform(self, year: int, tag: str, keys, n: int | None = None) -> np.ndarray:
        """Uniforms in (0, 1); shape ``(len(keys),)`` or ``(len(keys), n)``."""
        keys = np.asarray(keys, dtype=np.uint64)
        x = _mix(self._base(year, tag) ^ keys)
        if n is None:
            return bits_to_unit(_mix(x + _GOLDEN))
        steps = (np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN)[None, :]
        return bits_to_unit(_mix(x[:, None] + steps))

    def normal(self, year: int, tag: str, keys, n: int | None = None) -> np.ndarray:
        return special.ndtri(self.uniform(year, tag, keys, n))

    def generator(self, year: int, tag: str) -> np.random.Generator:
        """Sequential generator for single-owner steps (e.g. sampling families)."""
        base = int(self._base(year, tag)[0])
        return np.random.Generator(np.random.Philox(key=base))


def categorical(u: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Inverse-CDF categorical draw; ``probs`` is (k,) or (len(u), k)."""
    probs = np.asarray(probs, dtype=float)
    cum = np.cumsum(probs, axis=-1)
    if probs.ndim == 1:
        idx = np.searchsorted(cum, u * cum[-1], side="right")
        return np.minimum(idx, probs.shape[0] - 1)
    idx = (u[:, None] * cum[:, -1:] >= cum).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)
