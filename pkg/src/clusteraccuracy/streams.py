"""Deterministic counter-based random substreams.

Substream identity is a 64-bit key obtained by folding a master seed and
any number of integer stream indices through an avalanche mixing function
(the splitmix64 finalizer). Draw ``k`` of stream ``key`` is

    mix64(key + (k + 1) * GOLDEN)

which is exactly the splitmix64 output sequence seeded at ``key``. Because
every value is a pure function of ``(key, counter)``, streams can be
evaluated in any order, in blocks, or in parallel and still produce
identical draws.

Normal variates use the inverse-CDF transform of a 53-bit uniform in the
open interval (0, 1), so they inherit the same counter addressing. Bitwise
agreement across library versions is not promised, only determinism within
one installation.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_U64 = np.uint64
_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX_A = _U64(0xBF58476D1CE4E5B9)
_MIX_B = _U64(0x94D049BB133111EB)


def mix64(x: np.ndarray | int) -> np.ndarray:
    """splitmix64 finalizer: a bijective 64-bit avalanche mix."""
    x = np.array(x, dtype=np.uint64, copy=True)
    x ^= x >> _U64(30)
    x *= _MIX_A
    x ^= x >> _U64(27)
    x *= _MIX_B
    x ^= x >> _U64(31)
    return x


def derive_key(master_seed: int, *indices: int) -> int:
    """Fold a master seed and stream indices into a substream key.

    Each index passes through the avalanche mix before being combined, so
    nearby seeds or indices (0, 1, 2, ...) still yield uncorrelated keys.
    """
    key = mix64(int(master_seed) & _MASK64)
    for idx in indices:
        key = mix64(key ^ mix64(int(idx) & _MASK64))
    return int(key[()])


def stream_values(key: int | np.ndarray, start: int, count: int) -> np.ndarray:
    """Raw 64-bit draws [start, start+count) of one substream."""
    counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return mix64(np.array(key, dtype=np.uint64) + counters * _GOLDEN)


def block_values(keys: np.ndarray, draws: int) -> np.ndarray:
    """Raw draws 0..draws of many substreams at once, shape (len(keys), draws)."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = (np.arange(draws, dtype=np.uint64) + _U64(1)) * _GOLDEN
    return mix64(keys[:, None] + counters[None, :])


def to_uniform(bits: np.ndarray) -> np.ndarray:
    """Map raw 64-bit draws to float64 uniforms in the open interval (0, 1)."""
    return ((bits >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-53


def to_normal(bits: np.ndarray) -> np.ndarray:
    """Map raw 64-bit draws to standard normals via the inverse CDF."""
    return ndtri(to_uniform(bits))


class Substream:
    """Sequential view over one counter-based stream.

    Tracks a consumption position so successive calls return disjoint
    counter ranges. Two Substreams with the same key replay identically.
    """

    def __init__(self, key: int):
        self._key = int(key) & _MASK64
        self._pos = 0

    @property
    def key(self) -> int:
        return self._key

    @property
    def position(self) -> int:
        return self._pos

    def raw(self, count: int) -> np.ndarray:
        vals = stream_values(self._key, self._pos, count)
        self._pos += count
        return vals

    def uniforms(self, count: int) -> np.ndarray:
        return to_uniform(self.raw(count))

    def normals(self, count: int) -> np.ndarray:
        return to_normal(self.raw(count))
