"""Deterministic stream derivation for parallel Monte Carlo.

All randomness in the package is derived from a single integer master seed
through a splitmix64-style hash chain.  A *stream key* is a 64-bit value
obtained by folding indices (module tag, slice, grid node, path, ...) into
the seed; draws within a stream are counter-based, so any (key, counter)
pair maps to the same uniform regardless of thread scheduling or call
order.  The numba kernels implement the identical functions; this module
is the Python-side mirror used for seeding `numpy.random` generators and
for tests.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_STREAM = 0xC2B2AE3D27D4EB4F

# Stream tags keep independent subsystems off each other's streams.
TAG_SOLVER = 0x501
TAG_EXACT_SIM = 0x502
TAG_DISCRETE_SIM = 0x503
TAG_WEALTH_EVENTS = 0x504
TAG_WEALTH_DIFFUSION = 0x505
TAG_JUMP_MARKS = 0x506


def mix64(z: int) -> int:
    """splitmix64 finaliser (Stafford mix 13)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK
    return z ^ (z >> 31)


def derive_key(key: int, index: int) -> int:
    """Fold one index into a stream key; chain calls to fold several."""
    return mix64((key ^ (((index + 1) * _STREAM) & _MASK)) + _GOLDEN)


def stream_key(seed: int, *indices: int) -> int:
    """Derive the key for the stream identified by ``indices`` under ``seed``."""
    key = mix64(seed & _MASK)
    for idx in indices:
        key = derive_key(key, idx)
    return key


def uniform(key: int, counter: int) -> float:
    """The ``counter``-th uniform in [0, 1) of stream ``key``."""
    bits = mix64((key + counter * _GOLDEN) & _MASK)
    return (bits >> 11) * 2.0 ** -53


def generator(seed: int, *indices: int) -> np.random.Generator:
    """A numpy Generator on an independent Philox stream for ``indices``."""
    key = stream_key(seed, *indices)
    return np.random.Generator(np.random.Philox(key=key))
