"""Deterministic RNG derivation shared by all modules.

Every source of randomness in the toolkit flows from one user-supplied
64-bit seed plus a tuple of context keys (strings or integers), so results
are reproducible regardless of execution order or parallel scheduling.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_word(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    return zlib.crc32(str(key).encode("utf-8"))


def seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    entropy = [int(seed) & _MASK64] + [_key_word(k) for k in keys]
    return np.random.SeedSequence(entropy)


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Generator for the stream identified by (seed, *keys)."""
    return np.random.default_rng(seed_sequence(seed, *keys))


def derive_seed(seed: int, *keys) -> int:
    """Collapse (seed, *keys) into a single integer seed for sub-configs."""
    return int(seed_sequence(seed, *keys).generate_state(1, np.uint64)[0])
