"""Deterministic randomness: one 64-bit master seed, named sub-streams.

Every random draw in the package flows through :func:`substream`, so an
entire run (codebook generation, tie-breaking, synthetic data) is
replayable from a single integer. Sub-streams are keyed by name rather
than by draw order, which keeps codebooks stable when the label set
grows and keeps per-user synthetic data independent of user count.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def _digest(part: object) -> int:
    data = str(part).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def substream(seed: int, *scope: object) -> np.random.Generator:
    """Return the generator for the sub-stream named by ``scope``.

    The same (seed, scope) pair always yields an identical stream;
    distinct scopes yield statistically independent streams. Scope parts
    are hashed by their string form, so labels, user ids, and integers
    are all usable as keys.
    """
    entropy = [int(seed) & MASK64] + [_digest(p) for p in scope]
    return np.random.default_rng(np.random.SeedSequence(entropy))
