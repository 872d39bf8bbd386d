"""Vectorized Philox4x32-10 counter-based generator.

A draw is a pure function of ``(key, counter)``, so paths can be generated in
any order or in parallel with identical results.
"""
from __future__ import annotations

import numpy as np

M0 = np.uint64(0xD2511F53)
M1 = np.uint64(0xCD9E8D57)
W0 = np.uint64(0x9E3779B9)
W1 = np.uint64(0xBB67AE85)
MASK32 = np.uint64(0xFFFFFFFF)
ROUNDS = 10


def _u32(a) -> np.ndarray:
    return np.asarray(a, dtype=np.uint64) & MASK32


def philox4x32(counter, key, rounds: int = ROUNDS) -> np.ndarray:
    """Philox4x32 block function.

    Parameters
    ----------
    counter : array_like, shape (..., 4)
        32-bit counter words.
    key : array_like, shape (..., 2)
        32-bit key words; broadcast against ``counter``.

    Returns
    -------
    ndarray of uint32, shape (..., 4)
    """
    counter = np.asarray(counter, dtype=np.uint64)
    key = np.asarray(key, dtype=np.uint64)
    c0, c1, c2, c3 = (_u32(counter[..., i]) for i in range(4))
    k0, k1 = _u32(key[..., 0]), _u32(key[..., 1])
    with np.errstate(over="ignore"):
        for r in range(rounds):
            p0 = M0 * c0
            p1 = M1 * c2
            hi0, lo0 = p0 >> np.uint64(32), p0 & MASK32
            hi1, lo1 = p1 >> np.uint64(32), p1 & MASK32
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            if r + 1 < rounds:
                k0 = (k0 + W0) & MASK32
                k1 = (k1 + W1) & MASK32
    return np.stack(np.broadcast_arrays(c0, c1, c2, c3), axis=-1).astype(np.uint32)


def split_seed(seeds) -> np.ndarray:
    """64-bit seeds to ``(lo, hi)`` 32-bit key pairs."""
    s = np.asarray(seeds, dtype=np.uint64)
    return np.stack([s & MASK32, s >> np.uint64(32)], axis=-1)


def uniforms(seeds, step: int) -> np.ndarray:
    """Two uniforms in ``(0, 1)`` per seed at ``step``, with 53-bit resolution.

    Returns shape ``(len(seeds), 2)``.
    """
    key = split_seed(seeds)
    step = np.uint64(step)
    ctr = np.zeros(key.shape[:-1] + (4,), dtype=np.uint64)
    ctr[..., 0] = step & MASK32
    ctr[..., 1] = step >> np.uint64(32)
    w = philox4x32(ctr, key).astype(np.uint64)
    a = ((w[..., 0] >> np.uint64(5)) << np.uint64(26)) | (w[..., 1] >> np.uint64(6))
    b = ((w[..., 2] >> np.uint64(5)) << np.uint64(26)) | (w[..., 3] >> np.uint64(6))
    scale = 1.0 / 9007199254740992.0
    return np.stack([(a.astype(float) + 0.5) * scale, (b.astype(float) + 0.5) * scale], axis=-1)


def normals(seeds, step: int) -> np.ndarray:
    """One standard normal per seed at ``step`` (Box-Muller, cosine branch)."""
    u = uniforms(seeds, step)
    return np.sqrt(-2.0 * np.log(u[..., 0])) * np.cos(2.0 * np.pi * u[..., 1])
