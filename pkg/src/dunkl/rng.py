"""Counter-based random numbers (Philox4x32-10), vectorised over counters.

Every draw is a pure function of (seed, counter), so a path's noise does not
depend on how paths are batched or scheduled.  numpy's own Philox bit generator
holds a single counter per instance, which does not vectorise over thousands of
independent per-path streams; the block function below does.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

ROUNDS = 10


def philox4x32(counter: tuple, key: tuple[int, int]) -> tuple[np.ndarray, ...]:
    """Philox4x32-10 block function.

    ``counter`` holds four broadcastable arrays of 32-bit words, ``key`` two
    32-bit integers.  Returns four uint64 arrays whose values fit in 32 bits.
    """
    c0, c1, c2, c3 = np.broadcast_arrays(*[np.asarray(c, dtype=np.uint64) & _MASK for c in counter])
    k0 = np.uint64(key[0] & 0xFFFFFFFF)
    k1 = np.uint64(key[1] & 0xFFFFFFFF)
    for r in range(ROUNDS):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _S32, p0 & _MASK
        hi1, lo1 = p1 >> _S32, p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        if r < ROUNDS - 1:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


def seed_key(seed: int) -> tuple[int, int]:
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF


def _to_unit(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    # 53 random bits, centred in their cell: strictly inside (0, 1)
    bits = ((hi << _S32) | lo) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


class CounterStream:
    """Uniform and normal draws addressed by (path, step, slot, purpose).

    ``slot`` identifies a substep or event within a step; ``purpose``
    separates unrelated uses of the same position.  Each block yields two
    doubles, so draws needing more values use consecutive purposes.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.key = seed_key(seed)

    def uniforms(self, path, step, slot, purpose: int) -> tuple[np.ndarray, np.ndarray]:
        c = philox4x32((path, step, slot, purpose), self.key)
        return _to_unit(c[0], c[1]), _to_unit(c[2], c[3])

    def uniform_block(self, path, step, slot, purpose0: int, m: int) -> np.ndarray:
        """``m`` uniforms per counter position, shape (..., m)."""
        cols = []
        for j in range((m + 1) // 2):
            cols.extend(self.uniforms(path, step, slot, purpose0 + j))
        return np.stack(cols[:m], axis=-1)

    def normals(self, path, step, slot, purpose0: int, m: int) -> np.ndarray:
        """``m`` standard normals per counter position by inversion, shape (..., m)."""
        return ndtri(self.uniform_block(path, step, slot, purpose0, m))
