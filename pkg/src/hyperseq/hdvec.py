"""Bipolar hypervector and integer-accumulator primitives.

Operations on dense ±1 vectors and the integer memories they bundle
into:

    random_hypervector  draw a fresh quasi-orthogonal ±1 vector
    bind                elementwise product; self-inverse association
    permute             cyclic shift; encodes sequence position
    bundle_accumulate   superposition by integer addition (the memory op)
    bind_accumulator    flip an integer memory's signs by a ±1 vector
    cosine_similarity   normalized dot product in [-1, 1]
    sign_quantize       collapse an integer memory back to ±1

Hypervectors are plain numpy int8 arrays (10k dims = 10 KB). The
:class:`Accumulator` keeps exact integer counts so that bundling stays
commutative and associative bit-for-bit; its entry width bounds what a
persisted model spends per element, and additions saturate at the
width's extremes instead of wrapping (wrapping would corrupt the sign
structure that similarity depends on).

Binding and permutation report into an optional operation counter (see
:func:`count_ops`) so complexity contracts — constant-op sliding
updates, single-pass training — are testable rather than asserted.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, DimensionError, ZeroNormError

__all__ = [
    "Accumulator",
    "Hypervector",
    "OpCounter",
    "bind",
    "bind_accumulator",
    "bundle_accumulate",
    "cosine_similarity",
    "count_ops",
    "permute",
    "random_hypervector",
    "sign_quantize",
]

Hypervector = NDArray[np.int8]

# Saturation bounds per supported entry width. 64 means native int64
# arithmetic with no clipping; it is reserved for transient query
# results and is not a persistable width.
_WIDTH_BOUNDS: dict[int, tuple[int, int] | None] = {
    8: (-(1 << 7), (1 << 7) - 1),
    16: (-(1 << 15), (1 << 15) - 1),
    32: (-(1 << 31), (1 << 31) - 1),
    64: None,
}


class OpCounter:
    """Tally of primitive vector operations inside a :func:`count_ops` block."""

    __slots__ = ("bind", "permute", "bundle", "accumulator_bind")

    def __init__(self) -> None:
        self.bind = 0
        self.permute = 0
        self.bundle = 0
        self.accumulator_bind = 0

    def total(self) -> int:
        return self.bind + self.permute + self.bundle + self.accumulator_bind

    def as_dict(self) -> dict[str, int]:
        return {
            "bind": self.bind,
            "permute": self.permute,
            "bundle": self.bundle,
            "accumulator_bind": self.accumulator_bind,
        }


_counter: OpCounter | None = None


@contextmanager
def count_ops() -> Iterator[OpCounter]:
    """Count primitive vector operations executed within the block."""
    global _counter
    counter = OpCounter()
    previous = _counter
    _counter = counter
    try:
        yield counter
    finally:
        _counter = previous


class Accumulator:
    """Signed-integer bundling memory of fixed dimension.

    ``entry_bits`` bounds every element to the signed range of that
    width; :func:`bundle_accumulate` saturates there instead of
    wrapping. Elements live in int64 so arithmetic itself never wraps.
    """

    __slots__ = ("elements", "entry_bits")

    def __init__(self, elements: NDArray[np.int64], entry_bits: int = 32):
        arr = np.asarray(elements, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError("accumulator needs a non-empty 1-d element array")
        if entry_bits not in _WIDTH_BOUNDS:
            raise ConfigError(f"entry_bits must be one of {sorted(_WIDTH_BOUNDS)}, got {entry_bits}")
        self.elements = arr
        self.entry_bits = entry_bits

    @classmethod
    def zeros(cls, dim: int, entry_bits: int = 32) -> "Accumulator":
        if dim < 1:
            raise DimensionError(f"dim must be >= 1, got {dim}")
        return cls(np.zeros(dim, dtype=np.int64), entry_bits)

    @classmethod
    def from_vector(cls, v: Hypervector, entry_bits: int = 32) -> "Accumulator":
        return cls(np.asarray(v, dtype=np.int64).copy(), entry_bits)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def copy(self) -> "Accumulator":
        return Accumulator(self.elements.copy(), self.entry_bits)

    def is_zero(self) -> bool:
        return not self.elements.any()

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Accumulator(dim={self.dim}, entry_bits={self.entry_bits})"


def random_hypervector(dim: int, rng: np.random.Generator) -> Hypervector:
    """Draw a ±1 vector with i.i.d. fair-coin elements from ``rng``.

    Identical generator state yields an identical vector; independent
    draws are quasi-orthogonal (cosine concentrated near 0 with
    std 1/sqrt(dim)).
    """
    if dim < 1:
        raise DimensionError(f"dim must be >= 1, got {dim}")
    bits = rng.integers(0, 2, size=dim, dtype=np.int8)
    return (bits * np.int8(2) - np.int8(1))


def bind(a: Hypervector, b: Hypervector) -> Hypervector:
    """Elementwise product of two ±1 vectors.

    Self-inverse: bind(bind(x, a), a) == x, and bind(a, a) is all ones.
    The result is quasi-orthogonal to both inputs.
    """
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if _counter is not None:
        _counter.bind += 1
    return np.multiply(a, b)


def permute(v: Hypervector, positions: int) -> Hypervector:
    """Cyclic shift: element i moves to (i + positions) mod dim.

    Any integer is accepted; permute(permute(v, p), -p) == v. Preserves
    norms and pairwise similarities exactly and distributes over bind.
    """
    if _counter is not None:
        _counter.permute += 1
    return np.roll(v, positions)


def bundle_accumulate(acc: Accumulator, v: Hypervector, weight: int = 1) -> Accumulator:
    """Add ``weight`` copies of ±1 vector ``v`` into ``acc``, in place.

    Exact integer addition, hence commutative and associative across
    calls; saturates at the accumulator's entry width.
    """
    if acc.dim != v.shape[0]:
        raise DimensionError(f"dimension mismatch: {acc.dim} vs {v.shape[0]}")
    if weight < 1:
        raise ConfigError(f"weight must be >= 1, got {weight}")
    if _counter is not None:
        _counter.bundle += 1
    if weight == 1:
        acc.elements += v
    else:
        acc.elements += np.multiply(v, weight, dtype=np.int64)
    bounds = _WIDTH_BOUNDS[acc.entry_bits]
    if bounds is not None:
        np.clip(acc.elements, bounds[0], bounds[1], out=acc.elements)
    return acc


def bind_accumulator(acc: Accumulator, v: Hypervector) -> Accumulator:
    """Multiply an integer memory elementwise by a ±1 vector.

    This is the unbinding step of a query: sign flips only, magnitudes
    untouched, so applying the same vector twice restores ``acc``.
    """
    if acc.dim != v.shape[0]:
        raise DimensionError(f"dimension mismatch: {acc.dim} vs {v.shape[0]}")
    if _counter is not None:
        _counter.accumulator_bind += 1
    return Accumulator(acc.elements * v, acc.entry_bits)


def _as_array(x: Accumulator | NDArray) -> np.ndarray:
    return x.elements if isinstance(x, Accumulator) else np.asarray(x)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    Accepts hypervectors, accumulators, or any 1-d numeric arrays.
    Integer inputs use exact integer dot products, so equal vectors
    score exactly 1.0 and negations exactly -1.0.
    """
    av = _as_array(a)
    bv = _as_array(b)
    if av.shape != bv.shape:
        raise DimensionError(f"dimension mismatch: {av.shape[0]} vs {bv.shape[0]}")
    if np.issubdtype(av.dtype, np.integer) and np.issubdtype(bv.dtype, np.integer):
        a64 = av.astype(np.int64, copy=False)
        b64 = bv.astype(np.int64, copy=False)
        dot = int(np.dot(a64, b64))
        na = int(np.dot(a64, a64))
        nb = int(np.dot(b64, b64))
    else:
        a64 = av.astype(np.float64, copy=False)
        b64 = bv.astype(np.float64, copy=False)
        dot = float(np.dot(a64, b64))
        na = float(np.dot(a64, a64))
        nb = float(np.dot(b64, b64))
    if na == 0 or nb == 0:
        raise ZeroNormError("cosine similarity of an all-zero vector is undefined")
    return dot / math.sqrt(na * nb)


def sign_quantize(acc: Accumulator, tie_rng: np.random.Generator) -> Hypervector:
    """Collapse an integer memory to ±1 by sign.

    Zero entries are broken by ``tie_rng`` so the result is still
    reproducible from the owning seed rather than from an arbitrary
    convention.
    """
    signs = np.sign(acc.elements).astype(np.int8)
    zeros = signs == 0
    n_zero = int(zeros.sum())
    if n_zero:
        fills = tie_rng.integers(0, 2, size=n_zero, dtype=np.int8)
        signs[zeros] = fills * np.int8(2) - np.int8(1)
    return signs
