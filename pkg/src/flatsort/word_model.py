"""Word-level element representation and the auxiliary-memory probe.

An element is one unsigned machine word of ``word_bits`` bits.  The key
occupies the high ``key_bits`` bits and the payload the remaining low
bits, so ordering raw words refines ordering by key: two words with the
same key compare equal for sorting purposes regardless of payload.
Arrays are plain Python lists of such raw words; this module provides
the scalar views and the accounting object that every sorter reports
its auxiliary-word usage through.

Keys are 0-based, i.e. they range over [0, 2**key_bits).  Counter
arrays elsewhere in the package index from 0 for the same reason.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import ContractViolationError

MAX_WORD_BITS = 64


@dataclass(frozen=True)
class KeySpec:
    """Field widths of one element word.

    ``word_bits`` is the total width w of a word and ``key_bits`` the
    width k of the key field stored in the high bits.  The payload
    takes the low ``word_bits - key_bits`` bits; a payload width of 0
    is legal and makes elements pure keys.
    """

    word_bits: int = 32
    key_bits: int = 16

    def __post_init__(self) -> None:
        if not 1 <= self.key_bits <= self.word_bits <= MAX_WORD_BITS:
            raise ContractViolationError(
                f"need 1 <= key_bits <= word_bits <= {MAX_WORD_BITS}, "
                f"got key_bits={self.key_bits} word_bits={self.word_bits}"
            )

    @property
    def payload_bits(self) -> int:
        return self.word_bits - self.key_bits

    @property
    def key_universe(self) -> int:
        return 1 << self.key_bits

    @property
    def word_mask(self) -> int:
        return (1 << self.word_bits) - 1

    @property
    def payload_mask(self) -> int:
        return (1 << self.payload_bits) - 1

    def key_of(self, raw: int) -> int:
        return raw >> self.payload_bits

    def payload_of(self, raw: int) -> int:
        return raw & self.payload_mask

    def compression_hi_bits(self, region_length: int) -> int:
        """Widest high-bit slice the codec may steal from a region this long."""
        third = region_length // 3
        if third < 1:
            return 0
        return max(third.bit_length() - 1, 0)

    def supports_compression(self, region_length: int) -> bool:
        """True when the codec's default slice falls inside the key field."""
        hi = self.compression_hi_bits(region_length)
        return hi >= 1 and (hi <= self.key_bits or self.payload_bits == 0)


class Element(NamedTuple):
    """Scalar view of one raw word under a given KeySpec."""

    raw: int

    def key(self, spec: KeySpec) -> int:
        return spec.key_of(self.raw)

    def payload(self, spec: KeySpec) -> int:
        return spec.payload_of(self.raw)


def pack(key: int, payload: int, spec: KeySpec) -> int:
    """Combine a key and a payload into one raw word."""
    if not 0 <= key < spec.key_universe:
        raise ValueError(f"key {key} out of range for {spec.key_bits}-bit field")
    if not 0 <= payload <= spec.payload_mask:
        raise ValueError(
            f"payload {payload} out of range for {spec.payload_bits}-bit field"
        )
    return (key << spec.payload_bits) | payload


def unpack(raw: int, spec: KeySpec) -> tuple[int, int]:
    """Split a raw word back into (key, payload).  Inverse of :func:`pack`."""
    if not 0 <= raw <= spec.word_mask:
        raise ValueError(f"raw word {raw} out of range for {spec.word_bits} bits")
    return raw >> spec.payload_bits, raw & spec.payload_mask


def rank_of(sequence: Sequence[int], index: int, spec: KeySpec) -> int:
    """Rank of the element at 1-based ``index`` within ``sequence``.

    The rank counts elements with a strictly smaller key plus elements
    with an equal key at a position no later than ``index``.
    """
    if not 1 <= index <= len(sequence):
        raise ContractViolationError(f"index {index} out of range 1..{len(sequence)}")
    pb = spec.payload_bits
    target = sequence[index - 1] >> pb
    rank = 0
    for j, raw in enumerate(sequence, start=1):
        k = raw >> pb
        if k < target or (k == target and j <= index):
            rank += 1
    return rank


class AllocationProbe:
    """Accounting for auxiliary words of memory.

    ``acquire``/``release`` track words taken from the dynamic
    allocator (the scratch-hungry baselines use this).  ``workspace``
    declares a fixed-size working state for the duration of a block;
    every sorter in this package declares a constant-size workspace and
    never acquires dynamic words, which is what the constant-space
    acceptance checks measure.
    """

    def __init__(self) -> None:
        self.live_words = 0
        self.peak_words = 0

    def reset(self) -> None:
        self.live_words = 0
        self.peak_words = 0

    def acquire(self, words: int) -> None:
        if words < 0:
            raise ContractViolationError("cannot acquire a negative word count")
        self.live_words += words
        if self.live_words > self.peak_words:
            self.peak_words = self.live_words

    def release(self, words: int) -> None:
        if words < 0 or words > self.live_words:
            raise ContractViolationError(
                f"release of {words} words does not match {self.live_words} live"
            )
        self.live_words -= words

    @contextmanager
    def workspace(self, words: int):
        """Declare ``words`` of fixed working state for the enclosed block."""
        self.acquire(words)
        try:
            yield self
        finally:
            self.release(words)
