"""Merging k sorted runs in place, recycling blocks of borrowed scratch.

The area is viewed on a grid of fixed-size blocks anchored at the start
of the run data.  Output is written into free blocks: initially blocks
carved from the scratch region, later grid blocks whose words have all
been consumed by the merge fingers.  The order in which output blocks
were filled is recorded, and one final cycle-following pass permutes
them into place, one word in flight at a time.

Safety accounting.  A grid block is pinned while it still holds
unconsumed run words.  Each run pins at most one block around its
finger; a block spanning a run boundary can additionally pin consumed
words of the right run while the left run's tail waits.  With runs
aligned to the grid (guaranteed by the sorting drivers, which size
radix chunks as block multiples) the waste is under (k+1) blocks and
k+1 seed blocks suffice.  For arbitrary, unaligned runs the public
entry point uses 2k+1 seed blocks, which covers the boundary waste as
well; a dynamic assertion verifies that the writer never starves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import (
    CapacityError,
    ContractViolationError,
    InternalInvariantError,
)
from .word_model import AllocationProbe, KeySpec

# Fingers, cached head keys, the free-block ring and loop state.
MERGE_WORKSPACE_WORDS = 64


@dataclass
class MergePlan:
    """Record of one block merge: geometry plus the output block order."""

    k: int
    alpha: float
    block_words: int
    block_count: int
    output_order: list[int] = field(default_factory=list)
    min_free_seen: int = -1
    never_stuck: bool = True


def kway_block_merge(
    arr: list[int],
    lo: int,
    data_len: int,
    k: int,
    alpha: float,
    spec: KeySpec,
    run_lengths: list[int] | None = None,
    probe: AllocationProbe | None = None,
) -> MergePlan:
    """Merge k sorted runs laid out in arr[lo : lo+data_len], stably.

    The ``ceil(alpha * data_len)`` words after the data are free scratch;
    they seed the output blocks and are left as garbage.  Runs split
    ``data_len`` evenly unless ``run_lengths`` says otherwise.  Ties go
    to the lower run index, then position, so the result equals a
    stable merge of the concatenation.
    """
    if k < 2:
        raise ContractViolationError("k-way merge needs k >= 2")
    if run_lengths is None:
        if data_len % k:
            raise ContractViolationError(
                f"data length {data_len} does not split into {k} equal runs"
            )
        run_lengths = [data_len // k] * k
    if len(run_lengths) != k or sum(run_lengths) != data_len:
        raise ContractViolationError("run lengths do not cover the data region")
    if min(run_lengths) < 1:
        raise ContractViolationError("empty run")

    pb = spec.payload_bits
    bounds = []
    pos = lo
    for length in run_lengths:
        for i in range(pos, pos + length - 1):
            if arr[i] >> pb > arr[i + 1] >> pb:
                raise ContractViolationError(f"run starting at {pos} is not sorted")
        bounds.append((pos, pos + length))
        pos += length

    free_words = math.ceil(alpha * data_len)
    if free_words < k + 1:
        raise CapacityError(f"{free_words} free words cannot seed {k + 1} blocks")

    block_words = max(1, free_words // (k + 1))
    if any((s - lo) % block_words for s, _ in bounds):
        # Unaligned run boundaries can pin up to 2k partly consumed
        # blocks, so fall back to 2k+1 smaller seed blocks.
        block_words = max(1, free_words // (2 * k + 1))
        seeds = min(free_words // block_words, 2 * k + 2)
    else:
        seeds = min(free_words // block_words, k + 2)

    if probe is not None:
        probe.acquire(MERGE_WORKSPACE_WORDS)
    try:
        plan = MergePlan(k=k, alpha=alpha, block_words=block_words, block_count=0)
        order: list[int] = []
        _merge_runs(
            arr,
            lo,
            lo + data_len,
            bounds,
            block_words,
            lo + data_len,
            seeds,
            pb,
            order,
            plan,
        )
        plan.block_count = (data_len + block_words - 1) // block_words + seeds
        plan.output_order = list(order)
        _permute_chunks(
            arr, lo, lo + data_len, block_words, order, lo + data_len, seeds
        )
    finally:
        if probe is not None:
            probe.release(MERGE_WORKSPACE_WORDS)
    return plan


def permute_blocks(
    arr: list[int],
    lo: int,
    block_words: int,
    output_order: list[int],
    probe: AllocationProbe | None = None,
) -> None:
    """Rearrange equal-size blocks so block q ends up holding old block
    ``output_order[q]``.  Cycle-following, one word in flight at a time."""
    n_blocks = len(output_order)
    if sorted(output_order) != list(range(n_blocks)):
        raise ContractViolationError("output_order is not a permutation")
    if probe is not None:
        probe.acquire(MERGE_WORKSPACE_WORDS)
    try:
        order = list(output_order)
        inv = [0] * n_blocks
        for q, s in enumerate(order):
            inv[s] = q
        b = block_words
        for q in range(n_blocks):
            s = order[q]
            if s == q:
                continue
            qp = lo + q * b
            sp = lo + s * b
            for i in range(b):
                arr[qp + i], arr[sp + i] = arr[sp + i], arr[qp + i]
            y = inv[q]
            order[q] = q
            inv[q] = q
            order[y] = s
            inv[s] = y
    finally:
        if probe is not None:
            probe.release(MERGE_WORKSPACE_WORDS)


# ---------------------------------------------------------------------------
# Engine, shared with the sorting drivers
# ---------------------------------------------------------------------------


def plan_chunk_merge(
    total: int, scratch_words: int, word_bits: int, k_max: int = 8
) -> tuple[int, int] | None:
    """Pick (k, block_words) so rounds of k-way merges over ``total`` words
    fit their bookkeeping (order plus inverse word per grid chunk, k+2
    seed blocks) into ``scratch_words``.  None when even 2-way rounds do
    not fit."""
    for k in range(min(k_max, 8), 1, -1):
        seeds = k + 2
        b = max(1, int((2 * total / seeds) ** 0.5))
        for cand in (b, b + 1, 2 * b, max(1, b // 2), max(1, b - 1)):
            chunks = (total + cand - 1) // cand
            if chunks + seeds + 2 >= 1 << word_bits:
                continue  # slot ids and the sentinel must fit a scratch word
            if 2 * chunks + seeds * cand + 8 <= scratch_words:
                return k, cand
    return None


def merge_sorted_chunks(
    arr: list[int],
    lo: int,
    hi: int,
    chunk: int,
    block_words: int,
    k_cap: int,
    scratch_lo: int,
    scratch_words: int,
    spec: KeySpec,
    stats: MergePlan | None = None,
) -> None:
    """Merge consecutive sorted chunks of ``chunk`` words (last may be
    short) covering arr[lo:hi) into one run, in rounds of <= k_cap-way
    block merges.  ``chunk`` must be a multiple of ``block_words`` so
    that every run except the area's final one stays grid-aligned.
    Bookkeeping lives in the scratch words."""
    if chunk % block_words:
        raise ContractViolationError("chunk size must be a block multiple")
    pb = spec.payload_bits
    total = hi - lo
    run = chunk
    while run < total:
        group = run * k_cap
        start = lo
        while start < hi:
            end = min(start + group, hi)
            bounds = []
            p = start
            while p < end:
                q = min(p + run, end)
                bounds.append((p, q))
                p = q
            if len(bounds) > 1:
                n_chunks = (end - start + block_words - 1) // block_words
                seed_base = scratch_lo + 2 * n_chunks
                seeds = min(
                    (scratch_words - 2 * n_chunks) // block_words, len(bounds) + 2
                )
                if seeds < len(bounds) + 1:
                    raise CapacityError("scratch cannot seed this merge round")
                order = _merge_runs(
                    arr,
                    start,
                    end,
                    bounds,
                    block_words,
                    seed_base,
                    seeds,
                    pb,
                    None,
                    stats,
                    order_base=scratch_lo,
                )
                _permute_chunks(
                    arr, start, end, block_words, order, seed_base, seeds
                )
            start = end
        run = group


def merge_two_runs(
    arr: list[int],
    lo: int,
    mid: int,
    hi: int,
    scratch_lo: int,
    scratch_words: int,
    spec: KeySpec,
    stats: MergePlan | None = None,
) -> bool:
    """Stable 2-way block merge of arr[lo:mid) and arr[mid:hi) using the
    scratch words for seeds and the output order.  Returns False without
    touching anything when the scratch is too small.  A 2-way merge
    never starves for any alignment: waste stays under 3 blocks."""
    total = hi - lo
    if mid <= lo or mid >= hi:
        return True
    b = max(1, int((total / 2) ** 0.5))
    best = None
    for cand in (b, b + 1, 2 * b, max(1, b // 2)):
        chunks = (total + cand - 1) // cand
        if chunks + 6 >= 1 << spec.word_bits:
            continue
        need = 2 * chunks + 4 * cand + 4
        if need <= scratch_words and (best is None or cand > best):
            best = cand
    if best is None:
        return False
    b = best
    n_chunks = (total + b - 1) // b
    seed_base = scratch_lo + 2 * n_chunks
    seeds = min((scratch_words - 2 * n_chunks) // b, 4)
    order = _merge_runs(
        arr,
        lo,
        hi,
        [(lo, mid), (mid, hi)],
        b,
        seed_base,
        seeds,
        spec.payload_bits,
        None,
        stats,
        order_base=scratch_lo,
    )
    _permute_chunks(arr, lo, hi, b, order, seed_base, seeds)
    return True


def _merge_runs(
    arr: list[int],
    area_lo: int,
    area_hi: int,
    bounds: list[tuple[int, int]],
    b: int,
    seed_base: int,
    seed_count: int,
    pb: int,
    order_out: list[int] | None,
    stats: MergePlan | None,
    order_base: int = -1,
):
    """Core block merge.  Output-order entries go to ``order_out`` if given,
    otherwise into arr[order_base:].  Returns the order container (the
    list, or (order_base, count))."""
    k = len(bounds)
    total = area_hi - area_lo
    n_chunks = (total + b - 1) // b
    last_partial = 1 if total % b else 0
    if seed_count < k + 1:
        raise CapacityError(f"{seed_count} seed blocks cannot feed a {k}-way merge")

    fingers = [s for s, _ in bounds]
    ends = [e for _, e in bounds]
    heads = [arr[f] >> pb for f in fingers]
    free = list(range(n_chunks, n_chunks + seed_count))
    min_free = len(free)
    order_count = 0

    def slot_pos(slot: int) -> int:
        if slot < n_chunks:
            return area_lo + slot * b
        return seed_base + (slot - n_chunks) * b

    def try_release(slot: int) -> None:
        if slot >= n_chunks - last_partial or slot < 0:
            return
        s_lo = area_lo + slot * b
        s_hi = s_lo + b
        for j in range(k):
            fj = fingers[j]
            if fj < ends[j] and fj < s_hi and ends[j] > s_lo:
                return
        free.append(slot)

    cur = free.pop()
    out_pos = slot_pos(cur)
    out_left = min(b, total)
    out_written = 0
    alive = k

    while alive:
        if alive == 2:
            j1 = 0
            while heads[j1] < 0:
                j1 += 1
            j2 = j1 + 1
            while heads[j2] < 0:
                j2 += 1
            f1, e1 = fingers[j1], ends[j1]
            f2, e2 = fingers[j2], ends[j2]
            k1, k2 = heads[j1], heads[j2]
            to_b1 = b - (f1 - area_lo) % b
            to_b2 = b - (f2 - area_lo) % b
            while True:
                if k1 <= k2:
                    arr[out_pos] = arr[f1]
                    f1 += 1
                    if f1 >= e1:
                        fingers[j1] = f1
                        heads[j1] = -1
                        alive -= 1
                        try_release((f1 - 1 - area_lo) // b)
                        break
                    to_b1 -= 1
                    if to_b1 == 0:
                        to_b1 = b
                        fingers[j1] = f1
                        try_release((f1 - area_lo) // b - 1)
                    k1 = arr[f1] >> pb
                else:
                    arr[out_pos] = arr[f2]
                    f2 += 1
                    if f2 >= e2:
                        fingers[j2] = f2
                        heads[j2] = -1
                        alive -= 1
                        try_release((f2 - 1 - area_lo) // b)
                        break
                    to_b2 -= 1
                    if to_b2 == 0:
                        to_b2 = b
                        fingers[j2] = f2
                        try_release((f2 - area_lo) // b - 1)
                    k2 = arr[f2] >> pb
                out_pos += 1
                out_left -= 1
                out_written += 1
                if out_left == 0:
                    if order_out is not None:
                        order_out.append(cur)
                    else:
                        arr[order_base + order_count] = cur
                    order_count += 1
                    if not free:
                        if stats is not None:
                            stats.never_stuck = False
                        raise InternalInvariantError("merge writer starved")
                    if len(free) < min_free:
                        min_free = len(free)
                    cur = free.pop()
                    out_pos = slot_pos(cur)
                    out_left = min(b, total - out_written)
            # the exchanged element is already written; account for it
            out_pos += 1
            out_left -= 1
            out_written += 1
            fingers[j1] = f1
            fingers[j2] = f2
            if heads[j1] >= 0:
                heads[j1] = k1
            if heads[j2] >= 0:
                heads[j2] = k2
            if out_left == 0:
                if order_out is not None:
                    order_out.append(cur)
                else:
                    arr[order_base + order_count] = cur
                order_count += 1
                if out_written < total:
                    if not free:
                        if stats is not None:
                            stats.never_stuck = False
                        raise InternalInvariantError("merge writer starved")
                    if len(free) < min_free:
                        min_free = len(free)
                    cur = free.pop()
                    out_pos = slot_pos(cur)
                    out_left = min(b, total - out_written)
            continue
        if alive == 1:
            # Single survivor: stream the rest of it.
            j = 0
            while heads[j] < 0:
                j += 1
            f = fingers[j]
            e = ends[j]
            while f < e:
                arr[out_pos] = arr[f]
                out_pos += 1
                out_left -= 1
                f += 1
                out_written += 1
                if (f - area_lo) % b == 0:
                    fingers[j] = f
                    try_release((f - area_lo) // b - 1)
                if out_left == 0:
                    if order_out is not None:
                        order_out.append(cur)
                    else:
                        arr[order_base + order_count] = cur
                    order_count += 1
                    if out_written < total:
                        if not free:
                            if stats is not None:
                                stats.never_stuck = False
                            raise InternalInvariantError("merge writer starved")
                        if len(free) < min_free:
                            min_free = len(free)
                        cur = free.pop()
                        out_pos = slot_pos(cur)
                        out_left = min(b, total - out_written)
            fingers[j] = f
            try_release((f - 1 - area_lo) // b)
            alive = 0
            break

        best = 0
        best_key = -1
        for j in range(k):
            hk = heads[j]
            if hk >= 0 and (best_key < 0 or hk < best_key):
                best = j
                best_key = hk
        f = fingers[best]
        arr[out_pos] = arr[f]
        out_pos += 1
        out_left -= 1
        out_written += 1
        f += 1
        fingers[best] = f
        if f >= ends[best]:
            heads[best] = -1
            alive -= 1
            try_release((f - 1 - area_lo) // b)
        else:
            heads[best] = arr[f] >> pb
            if (f - area_lo) % b == 0:
                try_release((f - area_lo) // b - 1)
        if out_left == 0:
            if order_out is not None:
                order_out.append(cur)
            else:
                arr[order_base + order_count] = cur
            order_count += 1
            if out_written < total:
                if not free:
                    if stats is not None:
                        stats.never_stuck = False
                    raise InternalInvariantError("merge writer starved")
                if len(free) < min_free:
                    min_free = len(free)
                cur = free.pop()
                out_pos = slot_pos(cur)
                out_left = min(b, total - out_written)

    if order_count != n_chunks:
        raise InternalInvariantError("merge lost track of output chunks")
    if stats is not None and (stats.min_free_seen < 0 or min_free < stats.min_free_seen):
        stats.min_free_seen = min_free
    if order_out is not None:
        return order_out
    return (order_base, order_count)


def _permute_chunks(
    arr: list[int],
    area_lo: int,
    area_hi: int,
    b: int,
    order,
    seed_base: int,
    seed_count: int,
) -> None:
    """Move recorded output chunks onto the area grid, lowest first.

    ``order[q]`` names the slot that currently holds output chunk q;
    sources may be seed slots, so this is an injective placement rather
    than a permutation.  Each step swaps chunk q into its home slot and
    repairs the order entry of whatever the swap displaced, using an
    inverse map (one word per grid slot) kept next to the order words.
    """
    total = area_hi - area_lo
    n_chunks = (total + b - 1) // b
    none = n_chunks + seed_count  # sentinel: slot content is garbage

    if isinstance(order, tuple):
        order_base, count = order
        store = arr
        o_off = order_base
        inv_off = order_base + n_chunks
    else:
        store = order
        o_off = 0
        inv_off = None
        inv_list = [none] * n_chunks
    if (count if isinstance(order, tuple) else len(order)) != n_chunks:
        raise InternalInvariantError("output order does not cover the area")

    def inv_get(s: int) -> int:
        return store[inv_off + s] if inv_off is not None else inv_list[s]

    def inv_set(s: int, v: int) -> None:
        if inv_off is not None:
            store[inv_off + s] = v
        else:
            inv_list[s] = v

    for s in range(n_chunks):
        if inv_off is not None:
            store[inv_off + s] = none
    for q in range(n_chunks):
        s = store[o_off + q]
        if s < n_chunks:
            inv_set(s, q)

    def slot_pos(slot: int) -> int:
        if slot < n_chunks:
            return area_lo + slot * b
        return seed_base + (slot - n_chunks) * b

    # The final short chunk's home slot holds only consumed words by now,
    # so a plain copy suffices and its source becomes garbage.
    if total % b:
        q = n_chunks - 1
        s = store[o_off + q]
        if s != q:
            sp = slot_pos(s)
            dp = area_lo + q * b
            for i in range(total % b):
                arr[dp + i] = arr[sp + i]
            store[o_off + q] = q
            if s < n_chunks:
                inv_set(s, none)
            inv_set(q, q)

    full = n_chunks - (1 if total % b else 0)

    def run_chain(d):
        # Slot d holds garbage: pull its chunk in, which vacates the
        # source, and keep following until a seed or a settled slot.
        while True:
            s = store[o_off + d]
            dp = area_lo + d * b
            sp = slot_pos(s)
            for di, si in zip(range(dp, dp + b), range(sp, sp + b)):
                arr[di] = arr[si]
            store[o_off + d] = d
            inv_set(d, d)
            if s >= full:  # seed slot or the reserved short slot: chain ends
                break
            d = s
            if store[o_off + d] == d:
                break

    # Chains first: their heads are destinations whose content nobody
    # needs, so every block moves with plain copies.
    for q in range(full):
        if store[o_off + q] != q and inv_get(q) == none:
            run_chain(q)

    # Pure cycles remain; break each by parking one block in a spare
    # seed slot, which turns the cycle into a chain.
    spare = -1
    for q in range(full):
        if store[o_off + q] == q:
            continue
        if spare < 0:
            used = set()
            for i in range(n_chunks):
                s = store[o_off + i]
                if s >= n_chunks:
                    used.add(s)
            for cand in range(n_chunks, n_chunks + seed_count):
                if cand not in used:
                    spare = cand
                    break
        if spare >= 0:
            y = inv_get(q)
            qp = area_lo + q * b
            fp = slot_pos(spare)
            for fi, qi in zip(range(fp, fp + b), range(qp, qp + b)):
                arr[fi] = arr[qi]
            store[o_off + y] = spare
            run_chain(q)
            # the spare emptied again once the chain consumed it
        else:
            # no spare seed: rotate the cycle with swaps
            s = store[o_off + q]
            while s != q:
                qp = area_lo + q * b
                sp = slot_pos(s)
                for qi, si in zip(range(qp, qp + b), range(sp, sp + b)):
                    arr[qi], arr[si] = arr[si], arr[qi]
                y = inv_get(q)
                store[o_off + q] = q
                inv_set(q, q)
                store[o_off + y] = s
                inv_set(s, y)
                s = store[o_off + q]
