"""Counting and radix passes over borrowed scratch, the cycle-leader
counting sort, and the small-input fallbacks.

Counting passes and radix chunks run inside scratch words handed to
them by a caller (normally whole zeroed words of a compressed region's
tail).  The cycle-leader sort permutes a region into bucket order in
one pass, following permutation cycles; it is inherently unstable
because equal keys cannot be told apart once only bucket boundaries
remain.  The fallbacks at the bottom are the stable O(1)-word sorts
used below the sizes where the scratch machinery pays for itself.
"""

from __future__ import annotations

from .errors import CapacityError, ContractViolationError
from .word_model import AllocationProbe, KeySpec

# Loop state for a radix chunk or cycle-leader pass.
RADIX_WORKSPACE_WORDS = 32

# The in-place merge recursion is depth-bounded by the logarithm of the
# region length; regions handed to it are at most a few thousand words.
ROTMERGE_WORKSPACE_WORDS = 80


class CounterBank:
    """A bank of ``radix`` counters living in caller-provided words.

    Counters occupy whole words, or 16-bit halves when ``packed`` (used
    when the freed tail is too short for one word per counter; counts
    must then stay below 2**16).
    """

    def __init__(self, arr: list[int], base: int, radix: int, packed: bool = False):
        self.arr = arr
        self.base = base
        self.radix = radix
        self.packed = packed

    @property
    def words_used(self) -> int:
        return (self.radix + 1) // 2 if self.packed else self.radix

    def zero(self) -> None:
        arr = self.arr
        for i in range(self.base, self.base + self.words_used):
            arr[i] = 0

    def get(self, i: int) -> int:
        if self.packed:
            return (self.arr[self.base + (i >> 1)] >> ((i & 1) << 4)) & 0xFFFF
        return self.arr[self.base + i]

    def set(self, i: int, v: int) -> None:
        if self.packed:
            idx = self.base + (i >> 1)
            sh = (i & 1) << 4
            self.arr[idx] = (self.arr[idx] & ~(0xFFFF << sh)) | (v << sh)
        else:
            self.arr[self.base + i] = v

    def add(self, i: int, delta: int = 1) -> None:
        self.set(i, self.get(i) + delta)

    def exclusive_prefix_sums(self) -> None:
        """Replace counts with exclusive prefix sums (bucket start offsets)."""
        total = 0
        for i in range(self.radix):
            c = self.get(i)
            self.set(i, total)
            total += c


def counting_pass_stable(
    arr: list[int],
    src_lo: int,
    dst_lo: int,
    n: int,
    digit_of,
    counters: CounterBank,
    probe: AllocationProbe | None = None,
) -> None:
    """One stable counting pass: dst gets src ordered by ``digit_of``.

    ``dst`` must not overlap ``src``.  This is the readable general
    form; the radix driver below inlines the same two passes with
    shift/mask digits for speed.
    """
    if probe is not None:
        probe.acquire(RADIX_WORKSPACE_WORDS)
    try:
        radix = counters.radix
        counters.zero()
        for i in range(src_lo, src_lo + n):
            d = digit_of(arr[i])
            if not 0 <= d < radix:
                raise ContractViolationError(f"digit {d} outside [0, {radix})")
            counters.add(d)
        counters.exclusive_prefix_sums()
        for i in range(src_lo, src_lo + n):
            d = digit_of(arr[i])
            pos = counters.get(d)
            arr[dst_lo + pos] = arr[i]
            counters.set(d, pos + 1)
    finally:
        if probe is not None:
            probe.release(RADIX_WORKSPACE_WORDS)


def radix_sort_chunk(
    arr: list[int],
    lo: int,
    n: int,
    scratch_lo: int,
    scratch_words: int,
    spec: KeySpec,
    digit_bits: int | None = None,
    probe: AllocationProbe | None = None,
) -> None:
    """Stably sort arr[lo:lo+n] by key with LSD passes, ping-ponging
    between the chunk and ``n`` destination words of scratch.  Needs
    n + radix scratch words.  The digit width defaults to the widest
    the leftover counter space allows."""
    if n <= 1:
        return
    if digit_bits is None:
        spare = scratch_words - n
        digit_bits = min(spec.key_bits, max(1, (spare).bit_length() - 1))
    radix = 1 << digit_bits
    if scratch_words < n + radix:
        raise CapacityError(
            f"radix chunk needs {n + radix} scratch words, only {scratch_words}"
        )
    if probe is not None:
        probe.acquire(RADIX_WORKSPACE_WORDS)
    try:
        counters = CounterBank(arr, scratch_lo + n, radix)
        passes = -(-spec.key_bits // digit_bits)
        pb = spec.payload_bits
        mask = radix - 1
        src, dst = lo, scratch_lo
        for p in range(passes):
            shift = pb + p * digit_bits
            _counting_pass_fast(arr, src, dst, n, shift, mask, counters)
            src, dst = dst, src
        if src != lo:
            for i in range(n):
                arr[lo + i] = arr[src + i]
    finally:
        if probe is not None:
            probe.release(RADIX_WORKSPACE_WORDS)


def _counting_pass_fast(arr, src, dst, n, shift, mask, counters: CounterBank) -> None:
    base = counters.base
    counters.zero()
    for i in range(src, src + n):
        arr[base + ((arr[i] >> shift) & mask)] += 1
    total = 0
    for i in range(base, base + counters.radix):
        c = arr[i]
        arr[i] = total
        total += c
    for i in range(src, src + n):
        x = arr[i]
        slot = base + ((x >> shift) & mask)
        arr[dst + arr[slot]] = x
        arr[slot] += 1


def cycle_leader_sort(
    arr: list[int],
    lo: int,
    n: int,
    spec: KeySpec,
    c_bank: CounterBank,
    d_bank: CounterBank,
    probe: AllocationProbe | None = None,
) -> int:
    """Sort arr[lo:lo+n] by key in one counting pass plus cycle-leader
    exchanges.  ``c_bank``/``d_bank`` must each hold ``key_universe``
    counters (normally inside freed scratch).  Unstable.  Returns the
    number of exchanges performed (at most n)."""
    radix = c_bank.radix
    pb = spec.payload_bits
    if probe is not None:
        probe.acquire(RADIX_WORKSPACE_WORDS)
    try:
        c_bank.zero()
        d_bank.zero()
        for i in range(lo, lo + n):
            key = arr[i] >> pb
            if key >= radix:
                raise ContractViolationError(f"key {key} >= counter radix {radix}")
            c_bank.add(key)
        c_bank.exclusive_prefix_sums()

        exchanges = 0
        if c_bank.packed or d_bank.packed:
            j = 0
            while j < n:
                key = arr[lo + j] >> pb
                start = c_bank.get(key)
                end = c_bank.get(key + 1) if key + 1 < radix else n
                if start <= j < end:
                    j += 1
                    continue
                dpos = start + d_bank.get(key)
                arr[lo + j], arr[lo + dpos] = arr[lo + dpos], arr[lo + j]
                d_bank.add(key)
                exchanges += 1
        else:
            cb = c_bank.base
            db = d_bank.base
            j = 0
            while j < n:
                key = arr[lo + j] >> pb
                start = arr[cb + key]
                end = arr[cb + key + 1] if key + 1 < radix else n
                if start <= j < end:
                    j += 1
                    continue
                dpos = start + arr[db + key]
                arr[lo + j], arr[lo + dpos] = arr[lo + dpos], arr[lo + j]
                arr[db + key] += 1
                exchanges += 1
        return exchanges
    finally:
        if probe is not None:
            probe.release(RADIX_WORKSPACE_WORDS)


def bubble_sort_stable(
    arr: list[int], lo: int, n: int, spec: KeySpec, probe: AllocationProbe | None = None
) -> None:
    """Adjacent-exchange sort by key; stable; for tiny base cases only."""
    if probe is not None:
        probe.acquire(4)
    try:
        pb = spec.payload_bits
        end = lo + n
        changed = True
        while changed:
            changed = False
            for i in range(lo, end - 1):
                if arr[i] >> pb > arr[i + 1] >> pb:
                    arr[i], arr[i + 1] = arr[i + 1], arr[i]
                    changed = True
            end -= 1
    finally:
        if probe is not None:
            probe.release(4)


def heapsort_unstable(
    arr: list[int],
    lo: int,
    n: int,
    spec: KeySpec | None = None,
    on_raw: bool = True,
    probe: AllocationProbe | None = None,
) -> None:
    """Exchange-based heapsort of arr[lo:lo+n]; O(1) words, unstable.

    Sorts by full raw word by default (which refines key order and makes
    the result compressible with the full high slice); with
    ``on_raw=False`` compares keys only and never reads payload bits.
    """
    if n <= 1:
        return
    if probe is not None:
        probe.acquire(8)
    try:
        if on_raw or spec is None:
            pb = 0
        else:
            pb = spec.payload_bits
        # sift-down heap construction, then teardown; swaps only
        for root in range(n // 2 - 1, -1, -1):
            _sift(arr, lo, root, n, pb)
        for end in range(n - 1, 0, -1):
            arr[lo], arr[lo + end] = arr[lo + end], arr[lo]
            _sift(arr, lo, 0, end, pb)
    finally:
        if probe is not None:
            probe.release(8)


def _sift(arr, lo, root, size, pb):
    while True:
        child = 2 * root + 1
        if child >= size:
            return
        if child + 1 < size and (arr[lo + child] >> pb) < (arr[lo + child + 1] >> pb):
            child += 1
        if (arr[lo + root] >> pb) >= (arr[lo + child] >> pb):
            return
        arr[lo + root], arr[lo + child] = arr[lo + child], arr[lo + root]
        root = child


# ---------------------------------------------------------------------------
# Stable in-place fallback for regions below the machinery threshold
# ---------------------------------------------------------------------------


def rotate(arr: list[int], lo: int, mid: int, hi: int) -> None:
    """Exchange the adjacent regions [lo,mid) and [mid,hi) by reversal."""
    _reverse(arr, lo, mid)
    _reverse(arr, mid, hi)
    _reverse(arr, lo, hi)


def _reverse(arr, lo, hi):
    hi -= 1
    while lo < hi:
        arr[lo], arr[hi] = arr[hi], arr[lo]
        lo += 1
        hi -= 1


def merge_in_place_stable(arr: list[int], lo: int, mid: int, hi: int, pb: int) -> None:
    """Stable in-place merge of arr[lo:mid) and arr[mid:hi) by key,
    using rotations and binary splits.  O((hi-lo) log(hi-lo)) moves,
    recursion depth log2(hi-lo)."""
    n1 = mid - lo
    n2 = hi - mid
    if n1 == 0 or n2 == 0:
        return
    if n1 == 1:
        # left element goes before equal right elements
        x = arr[lo] >> pb
        a, b = mid, hi
        while a < b:
            m = (a + b) // 2
            if arr[m] >> pb < x:
                a = m + 1
            else:
                b = m
        rotate(arr, lo, mid, a)
        return
    if n2 == 1:
        # right element goes after equal left elements
        x = arr[mid] >> pb
        a, b = lo, mid
        while a < b:
            m = (a + b) // 2
            if arr[m] >> pb <= x:
                a = m + 1
            else:
                b = m
        rotate(arr, a, mid, hi)
        return
    if n1 >= n2:
        cut1 = lo + n1 // 2
        x = arr[cut1] >> pb
        a, b = mid, hi
        while a < b:  # first right element >= x keeps left-run priority
            m = (a + b) // 2
            if arr[m] >> pb < x:
                a = m + 1
            else:
                b = m
        cut2 = a
    else:
        cut2 = mid + n2 // 2
        x = arr[cut2] >> pb
        a, b = lo, mid
        while a < b:  # left elements <= x stay ahead of the pivot element
            m = (a + b) // 2
            if arr[m] >> pb <= x:
                a = m + 1
            else:
                b = m
        cut1 = a
        cut2 += 1
    rotate(arr, cut1, mid, cut2)
    new_mid = cut1 + (cut2 - mid)
    merge_in_place_stable(arr, lo, cut1, new_mid, pb)
    merge_in_place_stable(arr, new_mid, cut2, hi, pb)


def rotation_merge_sort(
    arr: list[int], lo: int, n: int, spec: KeySpec, probe: AllocationProbe | None = None
) -> None:
    """Bottom-up stable in-place mergesort by key: insertion-sorted
    16-element bases, then rotation merges of doubling width."""
    if n <= 1:
        return
    if probe is not None:
        probe.acquire(ROTMERGE_WORKSPACE_WORDS)
    try:
        pb = spec.payload_bits
        base = 16
        end = lo + n
        start = lo
        while start < end:
            stop = min(start + base, end)
            for i in range(start + 1, stop):
                x = arr[i]
                kx = x >> pb
                j = i - 1
                while j >= start and arr[j] >> pb > kx:
                    arr[j + 1] = arr[j]
                    j -= 1
                arr[j + 1] = x
            start = stop
        width = base
        while width < n:
            start = lo
            while start + width < end:
                merge_in_place_stable(
                    arr, start, start + width, min(start + 2 * width, end), pb
                )
                start += 2 * width
            width *= 2
    finally:
        if probe is not None:
            probe.release(ROTMERGE_WORKSPACE_WORDS)
