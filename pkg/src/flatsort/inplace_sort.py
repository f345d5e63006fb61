"""The two top-level in-place sorts over modifiable keys.

``sort_stable`` runs a bottom-up thirds schedule: the sorted prefix is
compressed, the freed words of its tail serve first as radix scratch
for chunks of the unsorted suffix and then as block-merge space, and
two more compress-merge-restore steps join the thirds.  ``sort_unstable``
sorts a short prefix by raw word, compresses it, and distributes the
whole suffix in a single cycle-leader counting pass through counters
kept in the freed words.

Both entry points declare a fixed workspace on the probe and acquire
nothing else; every sized structure they use lives inside the array.
Segments too small for the freed-bit machinery to pay for itself (the
threshold depends on the word and key widths, not on the array length)
fall back to a rotation-based stable mergesort, which is also in-place
and O(1) words.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import block_merge as bm
from . import codec, radix_core
from .errors import ContractViolationError
from .word_model import AllocationProbe, KeySpec

STABLE_WORKSPACE_WORDS = 192
UNSTABLE_WORKSPACE_WORDS = 128

_BUBBLE_CAP = 48  # bases above this use the rotation mergesort
_MIN_CHUNK = 16


@dataclass(frozen=True)
class RecursionSchedule:
    """Bottom-up prefix lengths realizing the thirds recursion.

    ``segments`` holds (offset, length, phase) triples in execution
    order: one 'base' segment no longer than sqrt(n0), then 'extend'
    segments whose sorted prefix is the previous segment.
    """

    segments: tuple[tuple[int, int, str], ...]
    n0: int


def build_schedule(n0: int) -> RecursionSchedule:
    if n0 < 0:
        raise ContractViolationError("negative length")
    if n0 <= 1:
        return RecursionSchedule(((0, n0, "base"),), n0)
    cutoff = max(1, int(n0**0.5 + 1e-9))
    lengths = [n0]
    while lengths[-1] > cutoff:
        lengths.append(-(-lengths[-1] // 3))
    lengths.reverse()
    segments = tuple(
        (0, ln, "base" if i == 0 else "extend") for i, ln in enumerate(lengths)
    )
    return RecursionSchedule(segments, n0)


def _allowed_hi(spec: KeySpec, length: int) -> int:
    """Widest codec slice a key-sorted region of this length supports."""
    hi = min((length // 3).bit_length() - 1, spec.word_bits)
    if spec.payload_bits:
        hi = min(hi, spec.key_bits)
    return hi


def _scratch_words_after_compress(spec: KeySpec, length: int, hi: int) -> int:
    """Whole zeroed words at the tail of a compressed region."""
    w = spec.word_bits
    two_thirds = (2 * length) // 3
    used = two_thirds * w + (length - two_thirds) * (w - hi)
    return length - (used + w - 1) // w


def sort_stable(
    arr: list[int],
    spec: KeySpec,
    probe: AllocationProbe | None = None,
    lo: int = 0,
    hi: int | None = None,
    gamma: float = 1.0,
) -> None:
    """Stable in-place sort of arr[lo:hi] by key, O(1) auxiliary words.

    ``gamma`` caps each radix chunk at that fraction of the working
    segment; the default lets the freed capacity set the chunk size,
    which minimises the number of merge rounds.
    """
    if hi is None:
        hi = len(arr)
    n = hi - lo
    if probe is not None:
        probe.acquire(STABLE_WORKSPACE_WORDS)
    try:
        if n <= 1:
            return
        schedule = build_schedule(n)
        prev_len = 0
        for _, length, phase in schedule.segments:
            if phase == "base":
                _sort_base(arr, lo, length, spec)
            else:
                _extend_segment(arr, lo, prev_len, length, spec, gamma)
            prev_len = length
    finally:
        if probe is not None:
            probe.release(STABLE_WORKSPACE_WORDS)


def _sort_base(arr, lo, n, spec):
    if n <= _BUBBLE_CAP:
        radix_core.bubble_sort_stable(arr, lo, n, spec)
    else:
        radix_core.rotation_merge_sort(arr, lo, n, spec)


def _extend_segment(arr, lo, prefix_len, m, spec, gamma):
    """Sort arr[lo:lo+m] given that arr[lo:lo+prefix_len] is sorted;
    prefix_len is ceil(m/3) by schedule construction."""
    t1 = prefix_len
    suffix = m - t1

    plan = _plan_extension(spec, t1, suffix, gamma)
    if plan is None:
        radix_core.rotation_merge_sort(arr, lo + t1, suffix, spec)
        radix_core.merge_in_place_stable(arr, lo, lo + t1, lo + m, spec.payload_bits)
        return
    hi_bits, chunk, digit_bits, k_cap, block_words = plan

    # Compress the sorted prefix; radix-sort suffix chunks through the
    # freed words; block-merge the chunks in rounds; restore the prefix.
    state = codec.compress_sorted(arr, lo, t1, spec, hi_bits=hi_bits, validate=False)
    s_lo, s_count = state.scratch_slots(lo, spec.word_bits)
    q_lo = lo + t1
    pos = q_lo
    while pos < lo + m:
        size = min(chunk, lo + m - pos)
        radix_core.radix_sort_chunk(
            arr, pos, size, s_lo, s_count, spec, digit_bits=digit_bits
        )
        pos += size
    bm.merge_sorted_chunks(
        arr, q_lo, lo + m, chunk, block_words, k_cap, s_lo, s_count, spec
    )
    codec.decompress_sorted(arr, lo, state, spec)

    # Join the thirds: merge first+middle through the compressed last
    # third, then middle+last through the compressed first third.  The
    # middle third must be exactly prefix-sized for the second step to
    # cover every displaced element.
    t2 = 2 * t1
    _merge_with_compressed_third(arr, lo, t1, t2, m, spec, compress_last=True)
    _merge_with_compressed_third(arr, lo, t1, t2, m, spec, compress_last=False)


def _plan_extension(spec, t1, suffix, gamma):
    """Work out hi_bits, chunk size, digit width and merge geometry for
    one extension segment, or None when the machinery does not fit."""
    if t1 < codec.MIN_REGION or suffix < 2:
        return None
    if suffix > spec.word_mask:  # counters and order words must hold counts
        return None
    hi_bits = _allowed_hi(spec, t1)
    if hi_bits < 1:
        return None
    s_count = _scratch_words_after_compress(spec, t1, hi_bits)
    plan = bm.plan_chunk_merge(suffix, s_count, spec.word_bits)
    if plan is None:
        return None
    k_cap, block_words = plan
    # Widest digit that still leaves most of the scratch to the chunk:
    # covering the whole key in one pass wins when the counters fit.
    digit_bits = min(spec.key_bits, max(1, (s_count // 2).bit_length() - 1))
    radix = 1 << digit_bits
    avail = s_count - radix
    target = max(_MIN_CHUNK, int(gamma * (t1 + suffix)))
    chunk = min(avail, target, suffix)
    chunk = (chunk // block_words) * block_words
    if chunk < max(block_words, _MIN_CHUNK // 2):
        return None
    return hi_bits, chunk, digit_bits, k_cap, block_words


def _two_run_scratch_need(total: int) -> int:
    """Mirror of the block size search in merge_two_runs: the fewest
    scratch words a 2-way block merge of ``total`` elements can use."""
    b = max(1, int((total / 2) ** 0.5))
    best = None
    for cand in (b, b + 1, 2 * b, max(1, b // 2)):
        need = 2 * ((total + cand - 1) // cand) + 4 * cand + 4
        if best is None or need < best:
            best = need
    return best


def _piece_for_merge(spec: KeySpec, region_len: int, total: int) -> int | None:
    """Shortest sorted prefix piece whose compression funds a 2-way
    merge of ``total`` elements; compressing more would only cost time."""
    need = _two_run_scratch_need(total) + 8
    length = 64
    while True:
        length = min(length, region_len)
        hi = _allowed_hi(spec, length)
        if (
            length >= codec.MIN_REGION
            and hi >= 1
            and _scratch_words_after_compress(spec, length, hi) >= need
        ):
            return length
        if length >= region_len:
            return None
        length *= 2


def _merge_with_compressed_third(arr, lo, t1, t2, m, spec, compress_last):
    """One join step: compress a piece of the last (or first) third,
    2-way block merge the other two thirds through its freed words,
    restore.  Falls back to the rotation merge when no piece can fund
    the block bookkeeping."""
    if compress_last:
        c_lo, c_len = lo + t2, m - t2
        m_lo, m_mid, m_hi = lo, lo + t1, lo + t2
    else:
        c_lo, c_len = lo, t1
        m_lo, m_mid, m_hi = lo + t1, lo + t2, lo + m
    if m_mid <= m_lo or m_hi <= m_mid:
        return
    piece = _piece_for_merge(spec, c_len, m_hi - m_lo)
    if piece is None:
        radix_core.merge_in_place_stable(arr, m_lo, m_mid, m_hi, spec.payload_bits)
        return
    state = codec.compress_sorted(
        arr, c_lo, piece, spec, hi_bits=_allowed_hi(spec, piece), validate=False
    )
    s_lo, s_count = state.scratch_slots(c_lo, spec.word_bits)
    done = bm.merge_two_runs(arr, m_lo, m_mid, m_hi, s_lo, s_count, spec)
    codec.decompress_sorted(arr, c_lo, state, spec)
    if not done:
        radix_core.merge_in_place_stable(arr, m_lo, m_mid, m_hi, spec.payload_bits)


def merge_adjacent_sorted(
    arr: list[int], lo: int, mid: int, hi: int, spec: KeySpec
) -> None:
    """Stable O(1)-word merge of the sorted runs arr[lo:mid) and
    arr[mid:hi), creating block-merge space by compressing first the
    right run's top third and then the merged run's bottom third.

    Requires len(left) <= 2 * len(right) / 3 or so for the second pass
    window to stay inside the merged run; callers here always merge a
    short prefix into a long suffix.  Falls back to the rotation merge
    when compression cannot fund the bookkeeping.
    """
    n1 = mid - lo
    n2 = hi - mid
    if n1 == 0 or n2 == 0:
        return
    pb = spec.payload_bits
    if arr[mid - 1] >> pb <= arr[mid] >> pb:
        return

    # The compressed piece is the top of the right run: it holds that
    # run's largest keys, so at most n1 merged elements (all from the
    # left run) can belong after it.
    t = _piece_for_merge(spec, n2 - 1, n1 + n2)
    if t is None:
        radix_core.merge_in_place_stable(arr, lo, mid, hi, pb)
        return

    # Pass 1: merge left with the right run minus its compressed top.
    state = codec.compress_sorted(
        arr, hi - t, t, spec, hi_bits=_allowed_hi(spec, t), validate=False
    )
    s_lo, s_count = state.scratch_slots(hi - t, spec.word_bits)
    done = bm.merge_two_runs(arr, lo, mid, hi - t, s_lo, s_count, spec)
    codec.decompress_sorted(arr, hi - t, state, spec)
    if not done:
        radix_core.merge_in_place_stable(arr, lo, mid, hi, pb)
        return

    # Pass 2: fold the displaced tail into the restored top piece.
    if arr[hi - t - 1] >> pb <= arr[hi - t] >> pb:
        return
    merged = hi - t - lo
    p2 = min(n1, merged)
    z_lo = hi - t - p2
    f = _piece_for_merge(spec, merged - p2, p2 + t)
    if f is not None and lo + f <= z_lo:
        fstate = codec.compress_sorted(
            arr, lo, f, spec, hi_bits=_allowed_hi(spec, f), validate=False
        )
        fs_lo, fs_count = fstate.scratch_slots(lo, spec.word_bits)
        done = bm.merge_two_runs(arr, z_lo, hi - t, hi, fs_lo, fs_count, spec)
        codec.decompress_sorted(arr, lo, fstate, spec)
        if done:
            return
    radix_core.merge_in_place_stable(arr, z_lo, hi - t, hi, pb)


def sort_unstable(
    arr: list[int],
    spec: KeySpec,
    probe: AllocationProbe | None = None,
    lo: int = 0,
    hi: int | None = None,
) -> None:
    """Unstable in-place sort by key: raw-sort a short prefix, compress
    it, and cycle-lead the suffix through counters in the freed words.
    O(1) auxiliary words; falls back to heapsort outside the counting
    regime (key universe too large for the freed capacity)."""
    if hi is None:
        hi = len(arr)
    n = hi - lo
    if probe is not None:
        probe.acquire(UNSTABLE_WORKSPACE_WORDS)
    try:
        if n <= 1:
            return
        plan = _plan_unstable(spec, n)
        if plan is None:
            radix_core.heapsort_unstable(arr, lo, n)
            return
        prefix, packed = plan

        radix_core.heapsort_unstable(arr, lo, prefix)
        raw_hi = min((prefix // 3).bit_length() - 1, spec.word_bits)
        state = codec.compress_sorted(
            arr, lo, prefix, spec, hi_bits=raw_hi, assume_raw_sorted=True, validate=False
        )
        s_lo, s_count = state.scratch_slots(lo, spec.word_bits)
        radix = spec.key_universe
        c_bank = radix_core.CounterBank(arr, s_lo, radix, packed=packed)
        d_bank = radix_core.CounterBank(
            arr, s_lo + c_bank.words_used, radix, packed=packed
        )
        radix_core.cycle_leader_sort(arr, lo + prefix, n - prefix, spec, c_bank, d_bank)
        codec.decompress_sorted(arr, lo, state, spec)
        merge_adjacent_sorted(arr, lo, lo + prefix, hi, spec)
    finally:
        if probe is not None:
            probe.release(UNSTABLE_WORKSPACE_WORDS)


def _plan_unstable(spec: KeySpec, n: int):
    """Prefix length and counter packing for the cycle-leader pass, or
    None when two banks of key-universe counters cannot fit."""
    radix = spec.key_universe
    if n - 1 > spec.word_mask:
        return None
    packed_ok = spec.word_bits >= 32 and n < (1 << 16)
    prefix = max(codec.MIN_REGION * 3, n // max(2, n.bit_length() - 1))
    while prefix <= n // 3:
        raw_hi = min((prefix // 3).bit_length() - 1, spec.word_bits)
        if raw_hi >= 1:
            s_count = _scratch_words_after_compress(spec, prefix, raw_hi)
            if 2 * radix <= s_count:
                return prefix, False
            if packed_ok and radix <= s_count:  # two 16-bit halves per word
                return prefix, True
        if prefix == n // 3:
            break
        prefix = min(n // 3, prefix * 2)
    return None
