"""Unipolar Bernoulli bit-streams and coincidence (AND) arithmetic.

A probability ``p`` in [0, 1] is carried as ``BL`` independent bits, each 1
with probability ``p``. Multiplying two such numbers is a bitwise AND, and the
product is recovered as ``popcount / BL``.

Streams are stored bit-packed (``np.packbits``) so a coincidence count is a
popcount over the byte-wise AND.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class StreamLengthError(ValueError):
    """Two streams that must be combined have different bit lengths."""


@dataclass
class StreamRng:
    """Replayable random source for bit-stream generation.

    Every call to :meth:`next_generator` derives a fresh generator from
    ``(seed, stream_position)`` and then advances the position, so the same
    seed and position always reproduce the same bits. Generators for distinct
    positions are statistically independent (``SeedSequence`` spawn keys).
    """

    seed: int
    stream_position: int = 0

    def generator_at(self, position: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(position,))
        return np.random.Generator(np.random.Philox(ss))

    def next_generator(self) -> np.random.Generator:
        gen = self.generator_at(self.stream_position)
        self.stream_position += 1
        return gen

    def child(self, index: int) -> "StreamRng":
        """Independent sub-stream, e.g. one per neuron or per layer."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(2**32 + index,))
        return StreamRng(int(ss.generate_state(1, dtype=np.uint64)[0]))


@dataclass(frozen=True)
class BernoulliStream:
    packed: np.ndarray = field(repr=False)
    length: int
    source_prob: float = float("nan")

    @classmethod
    def from_bits(cls, bits, source_prob: float = float("nan")) -> "BernoulliStream":
        bits = np.asarray(bits)
        if bits.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("bits must be 0 or 1")
        return cls(np.packbits(bits.astype(np.uint8)), int(bits.size), source_prob)

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=self.length)

    def __len__(self) -> int:
        return self.length


def _check_prob(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError(f"stream probability outside [0, 1]: {p.min() if p.size else p}..{p.max() if p.size else p}")
    return p


def encode_bits(p, bl: int, gen: np.random.Generator) -> np.ndarray:
    """Unpacked Bernoulli bits for an array of probabilities.

    Returns a ``uint8`` array of shape ``p.shape + (bl,)``. Out-of-range
    probabilities raise; clamping is the caller's decision.
    """
    if bl < 1:
        raise ValueError("bit length must be >= 1")
    p = _check_prob(p)
    u = gen.random(p.shape + (bl,))
    return (u < p[..., None]).view(np.uint8)


def encode(p: float, bl: int, rng: StreamRng) -> BernoulliStream:
    """Sample one stream of ``bl`` bits, each 1 with probability ``p``."""
    bits = encode_bits(np.float64(p), bl, rng.next_generator())
    return BernoulliStream(np.packbits(bits), bl, float(p))


def encode_many(p, bl: int, rng: StreamRng) -> np.ndarray:
    """Packed streams for every entry of ``p``: shape ``p.shape + (ceil(bl/8),)``."""
    return np.packbits(encode_bits(p, bl, rng.next_generator()), axis=-1)


def decode(s: BernoulliStream) -> float:
    return int(np.bitwise_count(s.packed).sum()) / s.length


def _same_length(a: BernoulliStream, b: BernoulliStream) -> None:
    if a.length != b.length:
        raise StreamLengthError(f"stream lengths differ: {a.length} vs {b.length}")


def and_multiply(a: BernoulliStream, b: BernoulliStream) -> BernoulliStream:
    _same_length(a, b)
    src = a.source_prob * b.source_prob
    return BernoulliStream(np.bitwise_and(a.packed, b.packed), a.length, src)


def coincidence_count(a: BernoulliStream, b: BernoulliStream) -> int:
    """Number of positions where both streams carry a 1."""
    _same_length(a, b)
    return int(np.bitwise_count(np.bitwise_and(a.packed, b.packed)).sum())


def popcount(packed: np.ndarray) -> np.ndarray:
    """Row-wise popcount of packed streams (last axis is the byte axis)."""
    return np.bitwise_count(packed).sum(axis=-1, dtype=np.int64)


def coincidence_counts(a_packed: np.ndarray, b_packed: np.ndarray) -> np.ndarray:
    """Element-wise coincidence counts of two equally shaped packed stream arrays."""
    if a_packed.shape[-1] != b_packed.shape[-1]:
        raise StreamLengthError("packed stream widths differ")
    return popcount(np.bitwise_and(a_packed, b_packed))


def coincidence_matrix(row_bits: np.ndarray, col_bits: np.ndarray) -> np.ndarray:
    """All-pairs coincidence counts between row and column streams.

    ``row_bits`` is ``(n_rows, BL)`` and ``col_bits`` is ``(n_cols, BL)``,
    both unpacked 0/1. Entry ``[i, j]`` is ``sum_n row[i, n] & col[j, n]``,
    computed as an integer-exact product of the 0/1 matrices. Each row stream
    is shared by every column and vice versa, as on crossbar wires.
    """
    if row_bits.shape[-1] != col_bits.shape[-1]:
        raise StreamLengthError(
            f"stream lengths differ: {row_bits.shape[-1]} vs {col_bits.shape[-1]}"
        )
    # float32 products of 0/1 values are exact for BL < 2**24
    return (row_bits.astype(np.float32) @ col_bits.astype(np.float32).T).astype(np.int32)


def sample_decoded(p, bl: int, gen: np.random.Generator) -> np.ndarray:
    """Decoded value of freshly encoded streams, ``popcount / bl``.

    Draws the popcount directly from Binomial(bl, p), which has exactly the
    distribution of the popcount of ``bl`` independent Bernoulli(p) bits,
    without materializing the bits.
    """
    if bl < 1:
        raise ValueError("bit length must be >= 1")
    p = _check_prob(p)
    return gen.binomial(bl, p) / bl
