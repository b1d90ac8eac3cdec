"""Positional n-gram encoding of state sequences.

A window (v_0, ..., v_{n-1}) encodes as the binding of each element
rotated by its positional exponent:

    encode = bind_{i=0..n-1} rotate(v_i, (n-1-i) * shift)

so the most recent element carries no rotation. A prefix of length n-1
encodes with the same exponents, which is exactly one extra rotation of
an (n-1)-slot encoding; binding it with any candidate last element
reproduces the full window encoding bit-for-bit. That factorization is
what makes prefix queries recover continuations by unbinding.

:class:`SlidingEncoder` advances a window with two binds and two
rotations regardless of session position, so encoding all windows of a
session costs a constant number of vector ops per step after the first.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .codebook import Codebook
from .errors import ArityError, ConfigError, DimensionError, UnknownLabelError
from .hdvec import Hypervector, bind, permute

__all__ = [
    "EncoderConfig",
    "NgramRecord",
    "SlidingEncoder",
    "encode_ngram",
    "encode_query",
    "session_ngrams",
]


@dataclass(frozen=True)
class EncoderConfig:
    """Window length, per-slot cyclic shift step, and dimensionality."""

    n: int
    shift: int
    dim: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.shift < 1:
            raise ConfigError(f"shift must be >= 1, got {self.shift}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.shift * (self.n - 1) >= self.dim:
            # Beyond this the positional rotations alias and order
            # information is destroyed.
            raise ConfigError(
                f"shift*(n-1) must stay below dim: {self.shift}*{self.n - 1} >= {self.dim}"
            )


def _check_dim(v: Hypervector, cfg: EncoderConfig) -> None:
    if v.shape[0] != cfg.dim:
        raise DimensionError(f"dimension mismatch: {v.shape[0]} vs {cfg.dim}")


def encode_ngram(vectors: Sequence[Hypervector], cfg: EncoderConfig) -> Hypervector:
    """Encode an ordered window of exactly n hypervectors."""
    vectors = list(vectors)
    if len(vectors) != cfg.n:
        raise ArityError(f"expected {cfg.n} vectors, got {len(vectors)}")
    out = None
    for i, v in enumerate(vectors):
        _check_dim(v, cfg)
        rolled = permute(v, (cfg.n - 1 - i) * cfg.shift)
        out = rolled if out is None else bind(out, rolled)
    return out


def encode_query(prefix: Sequence[Hypervector], cfg: EncoderConfig) -> Hypervector:
    """Encode an (n-1)-prefix so it unbinds continuations from a memory.

    Satisfies encode_ngram(prefix + [last]) == bind(encode_query(prefix), last)
    exactly: the prefix slots take the same exponents they would hold
    inside the full window.
    """
    prefix = list(prefix)
    if len(prefix) != cfg.n - 1:
        raise ArityError(f"expected a prefix of {cfg.n - 1} vectors, got {len(prefix)}")
    out = None
    for i, v in enumerate(prefix):
        _check_dim(v, cfg)
        rolled = permute(v, (cfg.n - 1 - i) * cfg.shift)
        out = rolled if out is None else bind(out, rolled)
    return out


class SlidingEncoder:
    """Incremental encoder over consecutive n-windows of one session.

    ``current`` always equals the direct encoding of the live window.
    ``advance`` strips the oldest element, realigns the rotation, and
    binds the incoming element: 2 binds + 2 rotations, independent of
    how far into the session the window sits.

    Single-owner mutable state; encode separate sessions with separate
    encoders.
    """

    __slots__ = ("config", "current", "_window")

    def __init__(self, first_window: Sequence[Hypervector], config: EncoderConfig):
        self.config = config
        window = list(first_window)
        self.current = encode_ngram(window, config)
        self._window = deque(window)

    @property
    def window(self) -> tuple[Hypervector, ...]:
        return tuple(self._window)

    def advance(self, incoming: Hypervector) -> Hypervector:
        _check_dim(incoming, self.config)
        cfg = self.config
        outgoing = self._window.popleft()
        # Unbind the departing element at its old top exponent, rotate
        # everyone up one slot, bind the newcomer at exponent zero.
        stripped = bind(self.current, permute(outgoing, (cfg.n - 1) * cfg.shift))
        self.current = bind(permute(stripped, cfg.shift), incoming)
        self._window.append(incoming)
        return self.current


class NgramRecord(NamedTuple):
    prefix: tuple[str, ...]
    target: str
    vector: Hypervector


def session_ngrams(session: Sequence[str], cb: Codebook, cfg: EncoderConfig) -> list[NgramRecord]:
    """Every continuous n-window of a session, encoded in one sliding pass.

    Sessions shorter than n yield an empty list; windows never span
    session boundaries and nothing is padded.
    """
    states = list(session)
    if len(states) < cfg.n:
        return []
    vectors = []
    for pos, label in enumerate(states):
        if label not in cb:
            raise UnknownLabelError(f"unknown state label {label!r} at position {pos}")
        vectors.append(cb.lookup(label))
    encoder = SlidingEncoder(vectors[: cfg.n], cfg)
    records = [NgramRecord(tuple(states[: cfg.n - 1]), states[cfg.n - 1], encoder.current)]
    for i in range(cfg.n, len(states)):
        vec = encoder.advance(vectors[i])
        records.append(NgramRecord(tuple(states[i - cfg.n + 1 : i]), states[i], vec))
    return records
