"""The sequence model: single-pass training, prefix queries, online adaptation.

Training bundles the encoding of every continuous n-window of every
training session into one integer memory. A prefix query unbinds the
prefix from that memory; because unrelated windows unbind to
quasi-orthogonal noise, the result is a frequency vector whose
similarity to each codebook key tracks that continuation's training
count. Prediction is the argmax of those similarities.

The adaptive memory mirrors the base memory and receives windows one at
a time (a constant number of D-length operations per event). Queries
read the elementwise sum of both memories, so adapting with weight 1 is
bit-for-bit equivalent to having trained on the extra windows. The two
memories stay separate so a shared base can be reused while per-user
adaptive state is forked or reset.

Model files are little-endian binary: a fixed header, the sorted label
table, codebook keys bit-packed to 1 bit per element, both memories at
the configured entry width, and a trailing CRC32.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .codebook import Codebook
from .errors import (
    ArityError,
    AdaptationDisabledError,
    ConfigError,
    DimensionError,
    EmptyTrainingError,
    ModelFormatError,
)
from .hdvec import Accumulator, Hypervector, bind_accumulator, bundle_accumulate
from .seqencode import EncoderConfig, encode_ngram, encode_query, session_ngrams

__all__ = ["Model", "ModelConfig", "QueryResult", "train"]

MAGIC = b"HSEQ"
FORMAT_VERSION = 1

# magic, version, dim, n, shift, entry_bits, adaptive, adapt_weight,
# seed, label_count, train_ngram_count, adapt_event_count
_HEADER = struct.Struct("<4sHIBBBBIQHQQ")
_CRC = struct.Struct("<I")
_LABEL_LEN = struct.Struct("<H")

_ENTRY_DTYPES = {8: np.dtype("<i1"), 16: np.dtype("<i2"), 32: np.dtype("<i4")}


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to rebuild a model's shape from scratch."""

    dim: int
    n: int
    shift: int
    seed: int
    adaptive: bool = False
    adapt_weight: int = 1
    entry_bits: int = 16

    def __post_init__(self) -> None:
        if self.dim < 64:
            raise ConfigError(f"dim must be >= 64, got {self.dim}")
        if not 2 <= self.n <= 255:
            raise ConfigError(f"n must be in [2, 255], got {self.n}")
        if not 1 <= self.shift <= 255:
            raise ConfigError(f"shift must be in [1, 255], got {self.shift}")
        if self.shift * (self.n - 1) >= self.dim:
            raise ConfigError(
                f"shift*(n-1) must stay below dim: {self.shift}*{self.n - 1} >= {self.dim}"
            )
        if self.adapt_weight < 1:
            raise ConfigError(f"adapt_weight must be >= 1, got {self.adapt_weight}")
        if self.entry_bits not in _ENTRY_DTYPES:
            raise ConfigError(f"entry_bits must be one of {sorted(_ENTRY_DTYPES)}, got {self.entry_bits}")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must fit an unsigned 64-bit integer")

    @property
    def encoder(self) -> EncoderConfig:
        return EncoderConfig(n=self.n, shift=self.shift, dim=self.dim)


@dataclass
class QueryResult:
    """Decoded prediction plus the evidence behind it."""

    predicted: str
    scores: dict[str, float]
    raw_r: Accumulator = field(repr=False)


class Model:
    """Base memory, optional adaptive memory, and their codebook."""

    def __init__(
        self,
        config: ModelConfig,
        codebook: Codebook,
        base: Accumulator | None = None,
        adaptive: Accumulator | None = None,
        train_ngram_count: int = 0,
        adapt_event_count: int = 0,
    ):
        if codebook.dim != config.dim:
            raise DimensionError(f"codebook dim {codebook.dim} != config dim {config.dim}")
        self.config = config
        self.codebook = codebook
        self.base = base if base is not None else Accumulator.zeros(config.dim, config.entry_bits)
        self.adaptive = (
            adaptive if adaptive is not None else Accumulator.zeros(config.dim, config.entry_bits)
        )
        if self.base.dim != config.dim or self.adaptive.dim != config.dim:
            raise DimensionError("memory dimensions must match the configuration")
        self.train_ngram_count = train_ngram_count
        self.adapt_event_count = adapt_event_count

    def fork(self) -> "Model":
        """Copy with independent adaptive state and a shared base.

        The base memory is shared read-only; use one fork per user when
        personalizing, so adaptation never leaks across users.
        """
        return Model(
            self.config,
            self.codebook,
            base=self.base,
            adaptive=self.adaptive.copy(),
            train_ngram_count=self.train_ngram_count,
            adapt_event_count=self.adapt_event_count,
        )

    def query_frequency(self, prefix: Sequence[str]) -> Accumulator:
        """Unbind an (n-1)-prefix from the combined memory.

        Returns the raw frequency vector; pure, the model is untouched.
        """
        labels = list(prefix)
        if len(labels) != self.config.n - 1:
            raise ArityError(f"prefix must have {self.config.n - 1} labels, got {len(labels)}")
        vectors = [self.codebook.lookup(label) for label in labels]
        q = encode_query(vectors, self.config.encoder)
        combined = Accumulator(self.base.elements + self.adaptive.elements, entry_bits=64)
        return bind_accumulator(combined, q)

    def predict_next(self, prefix: Sequence[str]) -> QueryResult:
        """Decode the frequency vector for ``prefix`` to its nearest state."""
        r = self.query_frequency(prefix)
        label, _, scores = self.codebook.decode_nearest(r)
        return QueryResult(predicted=label, scores=scores, raw_r=r)

    def adapt(self, window: Sequence[str]) -> None:
        """Fold one observed n-window into the adaptive memory.

        Constant number of D-length vector operations per event.
        """
        if not self.config.adaptive:
            raise AdaptationDisabledError("model was configured with adaptive=False")
        labels = list(window)
        if len(labels) != self.config.n:
            raise ArityError(f"window must have {self.config.n} labels, got {len(labels)}")
        vectors = [self.codebook.lookup(label) for label in labels]
        encoded = encode_ngram(vectors, self.config.encoder)
        bundle_accumulate(self.adaptive, encoded, self.config.adapt_weight)
        self.adapt_event_count += 1

    # -- persistence ----------------------------------------------------

    def to_bytes(self) -> bytes:
        """Serialize to the binary model format (header through CRC32)."""
        cfg = self.config
        labels = self.codebook.labels
        out = bytearray()
        out += _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            cfg.dim,
            cfg.n,
            cfg.shift,
            cfg.entry_bits,
            1 if cfg.adaptive else 0,
            cfg.adapt_weight,
            cfg.seed,
            len(labels),
            self.train_ngram_count,
            self.adapt_event_count,
        )
        for label in labels:
            encoded = label.encode("utf-8")
            out += _LABEL_LEN.pack(len(encoded))
            out += encoded
        for label in labels:
            out += np.packbits(self.codebook.lookup(label) > 0).tobytes()
        dtype = _ENTRY_DTYPES[cfg.entry_bits]
        out += self.base.elements.astype(dtype).tobytes()
        if cfg.adaptive:
            out += self.adaptive.elements.astype(dtype).tobytes()
        out += _CRC.pack(zlib.crc32(bytes(out)) & 0xFFFFFFFF)
        return bytes(out)

    def save(self, destination: str | BinaryIO) -> None:
        data = self.to_bytes()
        if hasattr(destination, "write"):
            destination.write(data)
        else:
            with open(destination, "wb") as fh:
                fh.write(data)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Model":
        """Parse the binary model format; bitwise inverse of to_bytes."""
        if len(data) < _HEADER.size + _CRC.size:
            raise ModelFormatError("truncated file: shorter than header plus checksum")
        stored_crc = _CRC.unpack_from(data, len(data) - _CRC.size)[0]
        actual_crc = zlib.crc32(data[: -_CRC.size]) & 0xFFFFFFFF
        if stored_crc != actual_crc:
            raise ModelFormatError(
                f"crc32 mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
            )
        (
            magic,
            version,
            dim,
            n,
            shift,
            entry_bits,
            adaptive_flag,
            adapt_weight,
            seed,
            label_count,
            train_ngram_count,
            adapt_event_count,
        ) = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise ModelFormatError(f"magic mismatch: expected {MAGIC!r}, found {magic!r}")
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"version {version} unsupported (expected {FORMAT_VERSION})")
        if entry_bits not in _ENTRY_DTYPES:
            raise ModelFormatError(f"entry_bits field invalid: {entry_bits}")
        if label_count < 1:
            raise ModelFormatError("label_count field must be >= 1")

        offset = _HEADER.size
        labels = []
        for _ in range(label_count):
            if offset + _LABEL_LEN.size > len(data):
                raise ModelFormatError("label table truncated")
            (length,) = _LABEL_LEN.unpack_from(data, offset)
            offset += _LABEL_LEN.size
            raw = data[offset : offset + length]
            if len(raw) != length:
                raise ModelFormatError("label table truncated")
            try:
                labels.append(raw.decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise ModelFormatError(f"label table holds invalid UTF-8: {exc}") from None
            offset += length

        packed_len = (dim + 7) // 8
        vectors: dict[str, Hypervector] = {}
        for label in labels:
            chunk = data[offset : offset + packed_len]
            if len(chunk) != packed_len:
                raise ModelFormatError("codebook section truncated")
            bits = np.unpackbits(np.frombuffer(chunk, dtype=np.uint8), count=dim)
            vectors[label] = (bits.astype(np.int8) * np.int8(2) - np.int8(1))
            offset += packed_len

        dtype = _ENTRY_DTYPES[entry_bits]
        mem_len = dim * dtype.itemsize

        def read_memory() -> Accumulator:
            nonlocal offset
            chunk = data[offset : offset + mem_len]
            if len(chunk) != mem_len:
                raise ModelFormatError("memory section truncated")
            offset += mem_len
            values = np.frombuffer(chunk, dtype=dtype).astype(np.int64)
            return Accumulator(values, entry_bits)

        base = read_memory()
        adaptive = read_memory() if adaptive_flag else None
        if offset != len(data) - _CRC.size:
            raise ModelFormatError("trailing bytes after memory sections")

        try:
            config = ModelConfig(
                dim=dim,
                n=n,
                shift=shift,
                seed=seed,
                adaptive=bool(adaptive_flag),
                adapt_weight=adapt_weight,
                entry_bits=entry_bits,
            )
        except ConfigError as exc:
            raise ModelFormatError(f"header holds an invalid configuration: {exc}") from None
        codebook = Codebook(dim, seed, vectors)
        return cls(
            config,
            codebook,
            base=base,
            adaptive=adaptive,
            train_ngram_count=train_ngram_count,
            adapt_event_count=adapt_event_count,
        )

    @classmethod
    def load(cls, source: str | BinaryIO) -> "Model":
        if hasattr(source, "read"):
            data = source.read()
        else:
            with open(source, "rb") as fh:
                data = fh.read()
        return cls.from_bytes(data)


def expected_file_size(config: ModelConfig, labels: Iterable[str]) -> int:
    """Exact byte size a model with this shape serializes to.

    header + per-label (2 + utf8 length) + labels*ceil(dim/8) packed
    keys + one memory at entry_bits/8 per element (two when adaptive)
    + 4-byte CRC.
    """
    label_list = sorted(labels)
    size = _HEADER.size
    size += sum(_LABEL_LEN.size + len(label.encode("utf-8")) for label in label_list)
    size += len(label_list) * ((config.dim + 7) // 8)
    memories = 2 if config.adaptive else 1
    size += memories * config.dim * (config.entry_bits // 8)
    return size + _CRC.size


def train(
    sessions: Iterable[Sequence[str]],
    config: ModelConfig,
    codebook: Codebook,
) -> Model:
    """Build the base memory in one pass over the training sessions.

    Every continuous n-window of every session is encoded once and
    bundled with weight 1; shuffling sessions cannot change the result
    because bundling is exact integer addition.
    """
    model = Model(config, codebook)
    encoder_cfg = config.encoder
    count = 0
    for states in sessions:
        for record in session_ngrams(states, codebook, encoder_cfg):
            bundle_accumulate(model.base, record.vector, 1)
            count += 1
    if count == 0:
        raise EmptyTrainingError(f"no training session reached the window length n={config.n}")
    model.train_ngram_count = count
    return model
