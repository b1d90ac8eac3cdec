"""Label ↔ hypervector mapping with nearest-key decoding.

A codebook assigns every state label one random hypervector. The
forward direction is a plain lookup; the reverse direction is realized
as nearest-neighbor search over the keys, because queries return noisy
integer accumulators rather than exact codebook entries.

Each label's vector is drawn from a sub-stream keyed by (seed, label),
so a codebook regenerates bit-for-bit from (labels, dim, seed) and is
stable when new labels join later.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    DuplicateLabelError,
    EmptyCodebookError,
    UnknownLabelError,
    ZeroNormError,
)
from .hdvec import Accumulator, Hypervector, random_hypervector
from .rng import substream

__all__ = ["Codebook", "build_codebook"]


class Codebook:
    """Immutable bijection between state labels and hypervectors.

    Construct through :func:`build_codebook` (random draws) or, when
    loading a persisted model, directly from explicit vectors.
    """

    __slots__ = ("dim", "seed", "labels", "_vectors", "_matrix")

    def __init__(self, dim: int, seed: int, vectors: dict[str, Hypervector]):
        if not vectors:
            raise EmptyCodebookError("a codebook needs at least one label")
        self.dim = dim
        self.seed = seed
        self.labels: tuple[str, ...] = tuple(sorted(vectors))
        for label, vec in vectors.items():
            if vec.shape != (dim,):
                raise DimensionError(f"vector for {label!r} has dim {vec.shape[0]}, expected {dim}")
        self._vectors = {label: vectors[label] for label in self.labels}
        for vec in self._vectors.values():
            vec.flags.writeable = False
        # Keys stacked in sorted-label order, widened once for fast dot
        # products during decoding.
        self._matrix = np.stack([self._vectors[label] for label in self.labels]).astype(np.int64)
        self._matrix.flags.writeable = False

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._vectors

    def lookup(self, label: str) -> Hypervector:
        """Return the stored vector for ``label``."""
        try:
            return self._vectors[label]
        except KeyError:
            raise UnknownLabelError(f"unknown state label {label!r}") from None

    def label_list(self) -> list[str]:
        """Labels in sorted order, ready for JSON export."""
        return list(self.labels)

    def decode_nearest(self, r: Accumulator | np.ndarray) -> tuple[str, float, dict[str, float]]:
        """Nearest key to ``r`` by cosine, with the full score map.

        Ties break toward the lexicographically smallest label. The
        score map is the discrete distribution over states that a
        frequency-vector query induces.
        """
        arr = r.elements if isinstance(r, Accumulator) else np.asarray(r, dtype=np.int64)
        if arr.shape != (self.dim,):
            raise DimensionError(f"dimension mismatch: {arr.shape[0]} vs {self.dim}")
        r64 = arr.astype(np.int64, copy=False)
        norm_sq = int(np.dot(r64, r64))
        if norm_sq == 0:
            raise ZeroNormError("cannot decode an all-zero frequency vector")
        dots = self._matrix @ r64
        # Every key has squared norm exactly dim, so one shared
        # denominator; integer products keep self-similarity at 1.0.
        scores = dots / math.sqrt(self.dim * norm_sq)
        winner = int(np.argmax(scores))
        score_map = {label: float(s) for label, s in zip(self.labels, scores)}
        return self.labels[winner], float(scores[winner]), score_map


def build_codebook(labels: Iterable[str], dim: int, seed: int) -> Codebook:
    """Draw one independent random hypervector per label.

    Deterministic in (sorted labels, dim, seed); insertion order is
    irrelevant because each label seeds its own sub-stream.
    """
    if dim < 1:
        raise DimensionError(f"dim must be >= 1, got {dim}")
    label_list = list(labels)
    if not label_list:
        raise ConfigError("label set must be non-empty")
    seen: set[str] = set()
    vectors: dict[str, Hypervector] = {}
    for label in label_list:
        if not isinstance(label, str) or not label:
            raise ConfigError(f"labels must be non-empty strings, got {label!r}")
        if label in seen:
            raise DuplicateLabelError(f"duplicate label {label!r}")
        seen.add(label)
        vectors[label] = random_hypervector(dim, substream(seed, "codebook", label))
    return Codebook(dim, seed, vectors)
