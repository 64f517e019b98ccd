"""Counter-based SplitMix64 streams.

Every random decision in a log is a pure function of a 64-bit seed and a
lane number, so any record can be replayed in isolation and whole logs can
be generated with vectorized numpy code.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 2.0 ** -53

# Lanes of the per-record stream.
LANE_ACTION = 1
LANE_CONTEXT = 2
LANE_REWARD = 3

# Tag xor-ed into the master seed for the environment's own randomness, so
# the logged action seeds never share a stream with context/reward draws.
ENV_TAG = 0xD1B54A32D192ED03


def _as_u64(x) -> np.ndarray:
    if isinstance(x, (int, np.integer)):
        return np.array([int(x) & MASK64], dtype=np.uint64)
    arr = np.asarray(x)
    if arr.dtype != np.uint64:
        arr = arr.astype(np.uint64)
    return np.atleast_1d(arr)


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = z.copy()
    z ^= z >> _S30
    z *= _M1
    z ^= z >> _S27
    z *= _M2
    z ^= z >> _S31
    return z


def splitmix(seed, k) -> np.ndarray:
    """k-th output (k >= 1) of a SplitMix64 generator started at ``seed``.

    ``seed`` and ``k`` broadcast against each other.
    """
    s = _as_u64(seed)
    kk = _as_u64(k)
    return mix64(s + kk * GOLDEN)


def to_unit(bits: np.ndarray) -> np.ndarray:
    """Map uint64 words to floats in [0, 1) using the top 53 bits."""
    return (bits >> _S11).astype(np.float64) * _INV53


def record_seeds(master_seed: int, start: int, stop: int) -> np.ndarray:
    """Per-record action seeds for indices ``start..stop-1``."""
    idx = np.arange(start, stop, dtype=np.uint64) + np.uint64(1)
    return splitmix(master_seed, idx)


def env_uniforms(master_seed: int, start: int, stop: int, lane: int) -> np.ndarray:
    """Environment-side uniforms for record indices ``start..stop-1``."""
    idx = np.arange(start, stop, dtype=np.uint64) + np.uint64(1)
    keys = splitmix(int(master_seed) ^ ENV_TAG, idx)
    return to_unit(splitmix(keys, lane))


def seed_uniform(seeds) -> np.ndarray:
    """The action-selection uniform a generator reset to ``seeds`` yields first."""
    return to_unit(splitmix(seeds, LANE_ACTION))
