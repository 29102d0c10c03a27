"""
IASim - Seed Derivation
Deterministic random streams keyed by (master seed, point, chunk).
"""
import hashlib
from typing import Any

import numpy as np


def point_id(*parts: Any) -> int:
    """Stable 64-bit identifier for an experiment point."""
    key = "|".join(repr(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def chunk_rng(seed: int, point: int, chunk_index: int) -> np.random.Generator:
    """
    Random stream for one trial chunk.

    Depends only on its three keys, so a chunk draws the same numbers
    whichever worker runs it.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence([seed, point & 0xFFFFFFFF, point >> 32, chunk_index])
    return np.random.default_rng(sequence)


def chunk_sizes(n_trials: int, chunk_size: int) -> list:
    """Split n_trials into fixed-size chunks (last one may be short)."""
    if n_trials < 0:
        raise ValueError(f"n_trials must be non-negative, got {n_trials}")
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be >= 1, got {chunk_size}")
    full, rest = divmod(n_trials, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])
