"""In-place compression of a sorted run, freeing trailing scratch bits.

A sorted sequence carries less information than an arbitrary one, so a
sorted run of L words can be rewritten, in place and in O(L) time, into
a form whose tail bits are all zero.  The layout used here:

* the most significant bit of each of the first floor(2L/3) words is
  stolen to hold a unary delta stream (the original MSBs are implied by
  ``msb_boundary``, the first position whose word has its top bit set);
* the stream spells out the high ``hi_bits`` bits of the last
  ceil(L/3) words as non-negative deltas: d zeros followed by a one,
  per word;
* the low ``word_bits - hi_bits`` bits of those last ceil(L/3) words
  are packed big-endian, without gaps, starting at word floor(2L/3);
* everything after the packed low bits is zeroed.  The advertised
  scratch capacity is floor(L/3) * hi_bits bits, and the fully-zero
  whole words of that tail can be borrowed as ordinary scratch words.

A delta code over consecutive differences would save more space but
cannot be built in place: a run of large values near the front expands
before any saving appears further right, so the rewrite would need to
shift data it has not yet read.  That alternative is deliberately not
implemented; constant factors in the saving do not matter here.

Decompression restores the region bit-for-bit.  It never reads the
advertised scratch tail, so callers may dirty those bits freely.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolationError, CorruptionError, UnsupportedSizeError
from .word_model import AllocationProbe, KeySpec

MIN_REGION = 12

# Fixed working state of a compress or decompress call: cursors, masks,
# the accumulator and the returned state object.
CODEC_WORKSPACE_WORDS = 16


@dataclass(frozen=True)
class CodecState:
    """Descriptor needed to invert a compressed region.

    ``msb_boundary`` is 1-based: the smallest index whose original word
    had its top bit set, or region_length + 1 if none did.
    ``freed_region`` is (bit offset, bit length) relative to the start
    of the region's word footprint; those bits are zero after
    compression and may be used as scratch.
    """

    region_length: int
    hi_bits: int
    lo_bits: int
    msb_boundary: int
    ones: int
    zeros: int
    freed_region: tuple[int, int]

    @property
    def freed_bits(self) -> int:
        return (self.region_length // 3) * self.hi_bits

    def scratch_slots(self, lo: int, word_bits: int) -> tuple[int, int]:
        """(first index, count) of whole array words that are free scratch."""
        used_bits = self.freed_region[0]
        first = lo + (used_bits + word_bits - 1) // word_bits
        return first, lo + self.region_length - first


def freed_capacity(n: int, spec: KeySpec | None = None) -> int:
    """Scratch bits gained by compressing a sorted run of n words."""
    if n < MIN_REGION:
        raise UnsupportedSizeError(f"region of {n} words is below {MIN_REGION}")
    third = n // 3
    return third * (third.bit_length() - 1)


def compress_sorted(
    arr: list[int],
    lo: int,
    length: int,
    spec: KeySpec,
    hi_bits: int | None = None,
    probe: AllocationProbe | None = None,
    assume_raw_sorted: bool = False,
    validate: bool = True,
) -> CodecState:
    """Rewrite the sorted run arr[lo:lo+length] into the compressed form.

    The run must be nondecreasing by key.  ``hi_bits`` defaults to
    floor(log2(length/3)) and must not exceed the key field unless the
    payload is empty (high-bit monotonicity would otherwise not follow
    from key order).  Narrow-key callers pass a smaller ``hi_bits`` and
    accept proportionally less scratch.  With ``assume_raw_sorted`` the
    run is validated as nondecreasing raw words instead, and any
    ``hi_bits`` up to the word width is admissible.
    """
    if probe is not None:
        probe.acquire(CODEC_WORKSPACE_WORDS)
    try:
        return _compress(arr, lo, length, spec, hi_bits, assume_raw_sorted, validate)
    finally:
        if probe is not None:
            probe.release(CODEC_WORKSPACE_WORDS)


def _compress(
    arr: list[int],
    lo: int,
    length: int,
    spec: KeySpec,
    hi_bits: int | None,
    raw_sorted: bool = False,
    validate: bool = True,
) -> CodecState:
    if length < MIN_REGION:
        raise UnsupportedSizeError(
            f"region of {length} words is below the codec floor {MIN_REGION}"
        )
    max_hi = min((length // 3).bit_length() - 1, spec.word_bits)
    key_field_free = raw_sorted or spec.payload_bits == 0
    if hi_bits is None:
        hi_bits = max_hi
        if hi_bits > spec.key_bits and not key_field_free:
            raise ContractViolationError(
                f"default hi_bits {hi_bits} exceeds the {spec.key_bits}-bit key "
                "field; pass hi_bits explicitly to steal a narrower slice"
            )
    if not 1 <= hi_bits <= max_hi:
        raise ContractViolationError(
            f"hi_bits must lie in [1, {max_hi}] for length {length}, got {hi_bits}"
        )
    if hi_bits > spec.key_bits and not key_field_free:
        raise ContractViolationError(
            f"hi_bits {hi_bits} reaches past the key field into payload bits"
        )

    w = spec.word_bits
    pb = 0 if raw_sorted else spec.payload_bits
    word_mask = spec.word_mask
    two_thirds = (2 * length) // 3
    tail_n = length - two_thirds
    lo_bits = w - hi_bits
    lo_mask = (1 << lo_bits) - 1
    hi_shift = lo_bits
    top = w - 1

    if validate:
        # One validation pass: sort order and the original MSB boundary.
        boundary = length + 1
        prev_key = -1
        for i in range(length):
            x = arr[lo + i]
            k = x >> pb
            if k < prev_key:
                raise ContractViolationError(f"region not sorted at offset {i}")
            prev_key = k
            if boundary == length + 1 and x >> top:
                boundary = i + 1
    else:
        # Sortedness is the caller's guarantee, so the MSB column is
        # monotone and the boundary comes from a binary search.
        a, b = 0, length
        while a < b:
            mid = (a + b) // 2
            if arr[lo + mid] >> top:
                b = mid
            else:
                a = mid + 1
        boundary = a + 1

    # Unary delta stream of the tail's high slices, written into the
    # MSBs of the first two thirds.  The tail itself is still intact.
    low_word = word_mask >> 1
    msb = 1 << top
    spos = 0
    prev_hi = 0
    zeros = 0
    for i in range(tail_n):
        h = arr[lo + two_thirds + i] >> hi_shift
        delta = h - prev_hi
        if delta < 0:
            raise ContractViolationError("high slice decreased inside the region")
        for _ in range(delta):
            arr[lo + spos] &= low_word
            spos += 1
        arr[lo + spos] |= msb
        spos += 1
        zeros += delta
        prev_hi = h
    # ceil(L/3) ones plus at most 2**hi_bits - 1 <= floor(L/3) zeros.
    if spos > two_thirds:
        raise CorruptionError("delta stream overran its budget")

    # Pack the low slices of the tail, big-endian, overwriting the tail
    # left to right.  The write cursor never catches the read cursor.
    out = lo + two_thirds
    acc = 0
    acc_bits = 0
    for i in range(tail_n):
        acc = (acc << lo_bits) | (arr[lo + two_thirds + i] & lo_mask)
        acc_bits += lo_bits
        while acc_bits >= w:
            acc_bits -= w
            arr[out] = (acc >> acc_bits) & word_mask
            out += 1
            acc &= (1 << acc_bits) - 1
    if acc_bits:
        arr[out] = (acc << (w - acc_bits)) & word_mask
        out += 1
    for i in range(out, lo + length):
        arr[i] = 0

    used_bits = two_thirds * w + tail_n * lo_bits
    return CodecState(
        region_length=length,
        hi_bits=hi_bits,
        lo_bits=lo_bits,
        msb_boundary=boundary,
        ones=tail_n,
        zeros=zeros,
        freed_region=(used_bits, length * w - used_bits),
    )


def decompress_sorted(
    arr: list[int],
    lo: int,
    state: CodecState,
    spec: KeySpec,
    probe: AllocationProbe | None = None,
) -> None:
    """Restore a compressed region to its original words, bit-exactly."""
    if probe is not None:
        probe.acquire(CODEC_WORKSPACE_WORDS)
    try:
        _decompress(arr, lo, state, spec)
    finally:
        if probe is not None:
            probe.release(CODEC_WORKSPACE_WORDS)


def _decompress(arr: list[int], lo: int, state: CodecState, spec: KeySpec) -> None:
    w = spec.word_bits
    length = state.region_length
    two_thirds = (2 * length) // 3
    tail_n = length - two_thirds
    hi_bits = state.hi_bits
    lo_bits = state.lo_bits
    top = w - 1
    hi_cap = 1 << hi_bits

    if tail_n != state.ones:
        raise CorruptionError("state does not match the region geometry")
    stream_len = state.ones + state.zeros
    if stream_len > two_thirds or state.zeros >= max(hi_cap, 1):
        raise CorruptionError("delta stream exceeds its representable budget")

    # Walk the stream backward so each tail word can be rebuilt after
    # its packed low bits (which live at strictly earlier bit offsets)
    # have been read.
    pack_base = lo + two_thirds
    zeros_total = state.zeros
    zeros_after = 0
    i = tail_n - 1
    running_hi = 0  # high slice of the element currently being emitted
    for spos in range(stream_len - 1, -1, -1):
        if (arr[lo + spos] >> top) & 1:
            if i < 0:
                raise CorruptionError("more stream ones than tail elements")
            running_hi = zeros_total - zeros_after
            if running_hi >= hi_cap:
                raise CorruptionError("accumulated high slice overflows hi_bits")
            bit_off = i * lo_bits
            idx = pack_base + bit_off // w
            sh = bit_off % w
            room = w - sh
            if lo_bits <= room:
                low = (arr[idx] >> (room - lo_bits)) & ((1 << lo_bits) - 1)
            else:
                spill = lo_bits - room
                low = ((arr[idx] & ((1 << room) - 1)) << spill) | (
                    arr[idx + 1] >> (w - spill)
                )
            arr[pack_base + i] = (running_hi << lo_bits) | low
            i -= 1
        else:
            zeros_after += 1
    if i >= 0:
        raise CorruptionError("stream ended before all tail elements were rebuilt")

    # Restore the stolen MSBs of the first two thirds from the boundary.
    low_word = (1 << top) - 1
    msb = 1 << top
    cut = state.msb_boundary - 1  # 0-based first position with MSB set
    for j in range(min(cut, two_thirds)):
        arr[lo + j] &= low_word
    for j in range(min(cut, two_thirds), two_thirds):
        arr[lo + j] |= msb
