"""Black-box transformation: any scratch-hungry sorter becomes O(1)-word.

``reduce_space`` sorts a short prefix in place, compresses it, and hands
the freed whole words of its tail to the wrapped sorter as scratch, one
chunk of the remaining array at a time.  The sorted chunks are then
block-merged through the same freed words, with run heads kept in a
binary heap keyed by (key, chunk index) so equal keys keep chunk order;
heap entries, merge fingers and the block bookkeeping all live in the
freed words as well.  Finally the prefix is restored and folded in with
the stable compress-and-merge dance.

The wrapped sorter only ever sees (array, chunk bounds, scratch bounds)
and must not allocate; two reference black boxes ship here, a counting
sort and an LSD radix sort, both stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import codec, radix_core
from .block_merge import _permute_chunks
from .errors import CapacityError, UnsupportedRegimeError
from .inplace_sort import (
    _allowed_hi,
    _scratch_words_after_compress,
    merge_adjacent_sorted,
    sort_stable,
)
from .word_model import AllocationProbe, KeySpec

REDUCER_WORKSPACE_WORDS = 224

_MIN_CHUNK = 12


@dataclass(frozen=True)
class BlackBoxSorter:
    """A sorting routine that works inside caller-provided scratch.

    ``sort(arr, lo, n, scratch_lo, scratch_words, spec)`` must sort
    arr[lo:lo+n] by key using only the given scratch slots;
    ``scratch_words_needed(n, spec)`` declares how many it wants.
    """

    name: str
    stable: bool
    scratch_words_needed: Callable[[int, KeySpec], int]
    sort: Callable[[list, int, int, int, int, KeySpec], None]


def _counting_sort_box(arr, lo, n, scratch_lo, scratch_words, spec):
    pb = spec.payload_bits
    radix = spec.key_universe
    cbase = scratch_lo + n
    for i in range(cbase, cbase + radix):
        arr[i] = 0
    for i in range(lo, lo + n):
        arr[cbase + (arr[i] >> pb)] += 1
    total = 0
    for i in range(cbase, cbase + radix):
        c = arr[i]
        arr[i] = total
        total += c
    for i in range(lo, lo + n):
        x = arr[i]
        slot = cbase + (x >> pb)
        arr[scratch_lo + arr[slot]] = x
        arr[slot] += 1
    for i in range(n):
        arr[lo + i] = arr[scratch_lo + i]


counting_sort_box = BlackBoxSorter(
    name="counting",
    stable=True,
    scratch_words_needed=lambda n, spec: n + spec.key_universe,
    sort=_counting_sort_box,
)


def _lsd_radix_box(arr, lo, n, scratch_lo, scratch_words, spec):
    # digit width adapts to whatever scratch the caller could spare
    radix_core.radix_sort_chunk(arr, lo, n, scratch_lo, scratch_words, spec)


lsd_radix_box = BlackBoxSorter(
    name="lsd_radix",
    stable=True,
    scratch_words_needed=lambda n, spec: n + 2,
    sort=_lsd_radix_box,
)


def heap_multiway_merge(
    arr: list[int],
    lo: int,
    total: int,
    run_len: int,
    scratch_lo: int,
    scratch_words: int,
    spec: KeySpec,
    block_words: int | None = None,
    probe: AllocationProbe | None = None,
) -> None:
    """Stable block merge of the uniform sorted runs of ``run_len`` words
    (last possibly short) covering arr[lo:lo+total).

    Run heads sit in a binary heap ordered by (head key, run index), so
    ties keep chunk order.  Fingers, cached head keys, the heap and the
    output-order bookkeeping all live in the scratch words; free output
    blocks are carved from what remains.  ``run_len`` must be a multiple
    of the block size.
    """
    if probe is not None:
        probe.acquire(REDUCER_WORKSPACE_WORDS)
    try:
        _heap_merge_runs(arr, lo, total, run_len, scratch_lo, scratch_words, spec, block_words)
    finally:
        if probe is not None:
            probe.release(REDUCER_WORKSPACE_WORDS)


def _plan_heap_merge(total, k, scratch_words, word_bits, run_len):
    """Block size for a k-run heap merge within the scratch, or None."""
    b = max(1, int((2 * total / (k + 2)) ** 0.5))
    for cand in (b, b + 1, 2 * b, max(1, b // 2), max(1, b - 1), 1):
        if cand > run_len:
            continue
        if run_len % cand:
            cand = _largest_divisor_at_most(run_len, cand)
            if cand is None:
                continue
        chunks = (total + cand - 1) // cand
        if chunks + k + 4 >= 1 << word_bits:
            continue
        if 4 * k + 2 * chunks + (k + 2) * cand + 8 <= scratch_words:
            return cand
    return None


def _largest_divisor_at_most(n, cap):
    for c in range(min(cap, n), 0, -1):
        if n % c == 0:
            return c
    return None


def _heap_merge_runs(arr, lo, total, run_len, scratch_lo, scratch_words, spec, block_words):
    k = -(-total // run_len)
    if k <= 1:
        return
    b = block_words if block_words is not None else _plan_heap_merge(
        total, k, scratch_words, spec.word_bits, run_len
    )
    if b is None or run_len % b:
        raise CapacityError("scratch cannot host this heap merge")
    pb = spec.payload_bits

    fingers = scratch_lo
    ends = fingers + k
    heads = ends + k
    heap = heads + k
    order_base = heap + k
    n_chunks = (total + b - 1) // b
    seed_base = order_base + 2 * n_chunks
    seeds = min((scratch_words - 4 * k - 2 * n_chunks) // b, k + 2)
    if seeds < k + 1 and seeds < 3:
        raise CapacityError("not enough seed blocks for the heap merge")
    last_partial = 1 if total % b else 0

    for j in range(k):
        s = lo + j * run_len
        e = min(s + run_len, lo + total)
        arr[fingers + j] = s
        arr[ends + j] = e
        arr[heads + j] = arr[s] >> pb
        arr[heap + j] = j

    # heapify on (head key, run index); ties keep the lower run
    def sift_down(i, size):
        while True:
            child = 2 * i + 1
            if child >= size:
                return
            rc = child + 1
            ja = arr[heap + child]
            ka = arr[heads + ja]
            if rc < size:
                jb = arr[heap + rc]
                kb = arr[heads + jb]
                if kb < ka or (kb == ka and jb < ja):
                    child = rc
                    ja = jb
                    ka = kb
            ji = arr[heap + i]
            ki = arr[heads + ji]
            if ki < ka or (ki == ka and ji < ja):
                return
            arr[heap + i], arr[heap + child] = arr[heap + child], arr[heap + i]
            i = child

    size = k
    for i in range(k // 2 - 1, -1, -1):
        sift_down(i, size)

    free = list(range(n_chunks, n_chunks + seeds))

    def slot_pos(slot):
        if slot < n_chunks:
            return lo + slot * b
        return seed_base + (slot - n_chunks) * b

    def try_release(slot):
        if slot < 0 or slot >= n_chunks - last_partial:
            return
        s_lo = lo + slot * b
        s_hi = s_lo + b
        j0 = max(0, (s_lo - lo) // run_len)
        j1 = min(k - 1, (s_hi - 1 - lo) // run_len)
        for j in (j0, j1):
            f = arr[fingers + j]
            if f < arr[ends + j] and f < s_hi and arr[ends + j] > s_lo:
                return
        free.append(slot)

    cur = free.pop()
    out_pos = slot_pos(cur)
    out_left = min(b, total)
    written = 0
    order_count = 0

    while size:
        j = arr[heap]
        f = arr[fingers + j]
        arr[out_pos] = arr[f]
        out_pos += 1
        out_left -= 1
        written += 1
        f += 1
        arr[fingers + j] = f
        if f >= arr[ends + j]:
            size -= 1
            arr[heap] = arr[heap + size]
            try_release((f - 1 - lo) // b)
        else:
            arr[heads + j] = arr[f] >> pb
            if (f - lo) % b == 0:
                try_release((f - lo) // b - 1)
        if size:
            sift_down(0, size)
        if out_left == 0:
            arr[order_base + order_count] = cur
            order_count += 1
            if written < total:
                if not free:
                    raise CapacityError("heap merge writer starved")
                cur = free.pop()
                out_pos = slot_pos(cur)
                out_left = min(b, total - written)

    _permute_chunks(
        arr, lo, lo + total, b, (order_base, order_count), seed_base, seeds
    )


def reduce_space(
    arr: list[int],
    spec: KeySpec,
    sorter: BlackBoxSorter,
    probe: AllocationProbe | None = None,
    lo: int = 0,
    hi: int | None = None,
) -> None:
    """Sort arr[lo:hi] by key with ``sorter`` while using O(1) auxiliary
    words: all of the sorter's scratch comes out of compressed-prefix
    bits.  Stable when the sorter is stable (the merge breaks ties by
    chunk index).  Raises CapacityError, before touching the array, if
    the freed words cannot satisfy the sorter's smallest useful chunk.
    """
    if hi is None:
        hi = len(arr)
    n = hi - lo
    if probe is not None:
        probe.acquire(REDUCER_WORKSPACE_WORDS)
    try:
        if n <= 1:
            return
        lg = max(1, n.bit_length() - 1)
        if spec.key_bits > max(16, 2 * lg):
            raise UnsupportedRegimeError(
                f"{spec.key_bits}-bit keys are outside the polylog regime for n={n}"
            )
        plan = _plan_reduction(n, spec, sorter)
        if plan is None:
            # The sorter's smallest useful chunk can never be funded.
            s_max = _best_scratch(n, spec)
            raise CapacityError(
                f"{sorter.name} needs "
                f"{sorter.scratch_words_needed(_MIN_CHUNK, spec)} scratch words "
                f"for a {_MIN_CHUNK}-element chunk; compression frees at most {s_max}"
            )
        if plan == "direct":
            sort_stable(arr, spec, lo=lo, hi=hi)
            return
        prefix, hi_bits, chunk, k_cap, merge_b = plan

        sort_stable(arr, spec, lo=lo, hi=lo + prefix)
        state = codec.compress_sorted(arr, lo, prefix, spec, hi_bits=hi_bits, validate=False)
        s_lo, s_words = state.scratch_slots(lo, spec.word_bits)

        pos = lo + prefix
        while pos < hi:
            size = min(chunk, hi - pos)
            sorter.sort(arr, pos, size, s_lo, s_words, spec)
            pos += size

        rest = n - prefix
        run = chunk
        while run < rest:
            group = run * k_cap
            start = lo + prefix
            while start < hi:
                end = min(start + group, hi)
                if end - start > run:
                    _heap_merge_runs(
                        arr, start, end - start, run, s_lo, s_words, spec, merge_b
                    )
                start = end
            run = group

        codec.decompress_sorted(arr, lo, state, spec)
        merge_adjacent_sorted(arr, lo, lo + prefix, hi, spec)
    finally:
        if probe is not None:
            probe.release(REDUCER_WORKSPACE_WORDS)


def _best_scratch(n, spec):
    prefix = (2 * n) // 3
    if prefix < codec.MIN_REGION:
        return 0
    return _scratch_words_after_compress(spec, prefix, max(1, _allowed_hi(spec, prefix)))


def _plan_reduction(n, spec, sorter):
    """Pick (prefix, hi_bits, chunk, k_cap, block) for the reduction.

    The prefix starts at n / log2 n and doubles while the freed words of
    its compressed tail cannot fund the sorter's chunk scratch plus the
    merge bookkeeping; words much wider than log2 n force bigger
    prefixes.  Returns "direct" when the array is too small to bother
    and None when even a two-thirds prefix cannot fund the sorter.
    """
    if n < 256:
        return "direct"  # too small for the transformation to mean anything
    lg = max(1, n.bit_length() - 1)
    prefix = max(codec.MIN_REGION, n // lg)
    cap = (2 * n) // 3
    if prefix + _MIN_CHUNK > n or cap < codec.MIN_REGION:
        return "direct"
    feasible_chunk_seen = False
    while prefix <= cap:
        hi_bits = _allowed_hi(spec, prefix)
        if hi_bits >= 1:
            s_count = _scratch_words_after_compress(spec, prefix, hi_bits)
            rest = n - prefix
            chunk = rest
            while chunk >= _MIN_CHUNK:
                if sorter.scratch_words_needed(chunk, spec) + 16 <= s_count:
                    break
                chunk = min(chunk - 1, max(_MIN_CHUNK, chunk * 3 // 4))
            else:
                chunk = 0
            if chunk >= _MIN_CHUNK:
                feasible_chunk_seen = True
                if chunk >= rest:
                    return prefix, hi_bits, chunk, 2, None
                for k_cap in (16, 8, 4, 2):
                    b = _plan_heap_merge(rest, k_cap, s_count, spec.word_bits, chunk)
                    if b is not None:
                        aligned = max(b, (chunk // b) * b)
                        return prefix, hi_bits, aligned, k_cap, b
        if prefix == cap:
            break
        prefix = min(cap, prefix * 2)
    del feasible_chunk_seen
    if sorter.stable and sorter.scratch_words_needed(_MIN_CHUNK, spec) <= _best_scratch(
        n, spec
    ):
        # Only the bookkeeping overhead blocks the reduction at this
        # size; a stable sorter's contract is met by the direct sort.
        return "direct"
    return None