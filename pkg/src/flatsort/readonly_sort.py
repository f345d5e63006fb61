"""Unstable linear-time sorting that never writes a key.

Every mutation in this module is an exchange of two whole elements; no
array word is ever computed and stored.  Auxiliary state beyond O(1)
machine words is simulated inside the array itself:

* bit memory: pairs of elements with provably distinct keys, taken from
  the value extremes of the array, encode one bit each in their
  relative order (increasing pair = 0);
* exchange memory: after a median split, the upper part's slots act as
  a working area.  A slot is empty exactly when it still holds one of
  the large placeholder elements, which the separator element's key
  detects in O(1);
* pseudo pointers: a pool of elements with distinct keys whose key
  values serve as read-only link tokens, letting bucket chains live in
  the exchange memory instead of the slow bit memory.

The driver repeatedly median-splits the remaining region, sorts the
lower part inside the upper part's slots (pool extraction, pointer
block sorts, group distribution, then a slab bucket sort whose head
position is cached in plain words for the duration of each equal-key
run), and continues on the upper part.  Degenerate shapes fall back to
an exchange-only heapsort on key comparisons, which keeps every
contract except the linear time bound.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    CapacityError,
    ContractViolationError,
    InternalInvariantError,
    UnsupportedRegimeError,
)
from .word_model import AllocationProbe, KeySpec

READONLY_WORKSPACE_WORDS = 224

_SMALL_REGION = 64  # below this a region is heapsorted directly
_SELECT_BASE = 24


@dataclass
class ReadonlyStats:
    """Optional instrumentation: exchange and bit-memory traffic."""

    exchanges: int = 0
    bit_reads: int = 0
    bit_writes: int = 0
    head_flushes: int = 0
    group_splits: int = 0
    early_drains: int = 0
    heapsort_fallbacks: int = 0


@dataclass(frozen=True)
class PointerPools:
    """Guide and pseudo-pointer zones: d distinct-key elements each,
    guides in sorted key order, pointers in arbitrary order."""

    guide_lo: int
    pointer_lo: int
    d: int


class ExchangeMemory:
    """A working area simulated by placeholder elements.

    ``sep_index`` holds the separator, which never moves; every slot at
    or after ``base`` is empty exactly when its occupant's key is not
    below the separator's key.
    """

    def __init__(self, arr: list[int], sep_index: int, length: int, spec: KeySpec):
        self.arr = arr
        self.sep_index = sep_index
        self.base = sep_index + 1
        self.length = length  # usable slots, separator excluded
        self.sep_key = arr[sep_index] >> spec.payload_bits
        self._pb = spec.payload_bits

    def is_empty(self, pos: int) -> bool:
        return self.arr[pos] >> self._pb >= self.sep_key


class BitMemory:
    """m bits encoded in the order of element pairs (left_i, right_i).

    ``read_bit`` compares keys; ``write_bit`` exchanges the pair when
    the stored bit differs.  Named fields (flat or array-shaped) are
    carved out of the bit space by ``allocate``; ``counter_add1`` is the
    binary increment whose touched bits stay linear over a series.
    """

    def __init__(
        self,
        arr: list[int],
        left_base: int,
        right_base: int,
        m: int,
        spec: KeySpec,
        stats: ReadonlyStats | None = None,
    ):
        self.arr = arr
        self.left_base = left_base
        self.right_base = right_base
        self.m = m
        self.pb = spec.payload_bits
        self.stats = stats if stats is not None else ReadonlyStats()
        self.layout: dict[str, tuple[int, int, int]] = {}  # name -> (off, count, width)
        self._next = 0

    def read_bit(self, i: int) -> int:
        if not 0 <= i < self.m:
            raise ContractViolationError(f"bit index {i} outside [0, {self.m})")
        self.stats.bit_reads += 1
        a = self.arr
        pb = self.pb
        return 1 if a[self.left_base + i] >> pb > a[self.right_base + i] >> pb else 0

    def write_bit(self, i: int, v: int) -> None:
        if not 0 <= i < self.m:
            raise ContractViolationError(f"bit index {i} outside [0, {self.m})")
        a = self.arr
        pb = self.pb
        li = self.left_base + i
        ri = self.right_base + i
        cur = 1 if a[li] >> pb > a[ri] >> pb else 0
        if cur != v:
            a[li], a[ri] = a[ri], a[li]
            self.stats.exchanges += 1
        self.stats.bit_writes += 1

    def reset_layout(self) -> None:
        self.layout.clear()
        self._next = 0

    def allocate(self, name: str, count: int, width: int) -> None:
        need = count * width
        if self._next + need > self.m:
            raise CapacityError(
                f"bit field {name} ({need} bits) exceeds remaining {self.m - self._next}"
            )
        self.layout[name] = (self._next, count, width)
        self._next += need

    @property
    def bits_free(self) -> int:
        return self.m - self._next

    def zero_field(self, name: str) -> None:
        off, count, width = self.layout[name]
        arr = self.arr
        pb = self.pb
        lb = self.left_base
        rb = self.right_base
        flips = 0
        for i in range(off, off + count * width):
            li = lb + i
            ri = rb + i
            if arr[li] >> pb > arr[ri] >> pb:
                arr[li], arr[ri] = arr[ri], arr[li]
                flips += 1
        st = self.stats
        st.bit_writes += count * width
        st.exchanges += flips

    def read_field(self, name: str, index: int = 0) -> int:
        off, count, width = self.layout[name]
        if not 0 <= index < count:
            raise ContractViolationError(f"{name}[{index}] out of range")
        base = off + index * width
        arr = self.arr
        pb = self.pb
        lb = self.left_base
        rb = self.right_base
        v = 0
        for b in range(base + width - 1, base - 1, -1):  # bit 0 least significant
            v = (v << 1) | (1 if arr[lb + b] >> pb > arr[rb + b] >> pb else 0)
        self.stats.bit_reads += width
        return v

    def write_field(self, name: str, index: int, value: int) -> None:
        off, count, width = self.layout[name]
        if not 0 <= index < count:
            raise ContractViolationError(f"{name}[{index}] out of range")
        base = off + index * width
        arr = self.arr
        pb = self.pb
        lb = self.left_base
        rb = self.right_base
        flips = 0
        for b in range(width):
            li = lb + base + b
            ri = rb + base + b
            cur = 1 if arr[li] >> pb > arr[ri] >> pb else 0
            if cur != (value >> b) & 1:
                arr[li], arr[ri] = arr[ri], arr[li]
                flips += 1
        st = self.stats
        st.bit_writes += width
        st.exchanges += flips

    def counter_add1(self, name: str, index: int = 0) -> int:
        """Binary increment; returns the number of bits written."""
        off, count, width = self.layout[name]
        if not 0 <= index < count:
            raise ContractViolationError(f"{name}[{index}] out of range")
        base = off + index * width
        arr = self.arr
        pb = self.pb
        lb = self.left_base
        rb = self.right_base
        st = self.stats
        touched = 0
        for b in range(base, base + width):
            li = lb + b
            ri = rb + b
            touched += 1
            if arr[li] >> pb > arr[ri] >> pb:  # bit is 1: flip to 0, carry on
                arr[li], arr[ri] = arr[ri], arr[li]
                st.exchanges += 1
            else:  # bit is 0: flip to 1, done
                arr[li], arr[ri] = arr[ri], arr[li]
                st.exchanges += 1
                st.bit_reads += touched
                st.bit_writes += touched
                return touched
        raise InternalInvariantError(f"counter {name}[{index}] overflowed")


# ---------------------------------------------------------------------------
# Selection and partitioning substitutes (exchange-only, key compares)
# ---------------------------------------------------------------------------


def _median3(arr, a, b, c, pb):
    ka, kb, kc = arr[a] >> pb, arr[b] >> pb, arr[c] >> pb
    if ka < kb:
        if kb < kc:
            return kb
        return ka if ka > kc else kc
    if ka < kc:
        return ka
    return kb if kb > kc else kc


def _heapsort_keys(arr, lo, n, pb, stats: ReadonlyStats | None = None):
    """Exchange-only heapsort comparing keys alone."""
    if n <= 1:
        return
    xc = 0
    for root in range(n // 2 - 1, -1, -1):
        r = root
        while True:
            child = 2 * r + 1
            if child >= n:
                break
            if child + 1 < n and (arr[lo + child] >> pb) < (arr[lo + child + 1] >> pb):
                child += 1
            if (arr[lo + r] >> pb) >= (arr[lo + child] >> pb):
                break
            arr[lo + r], arr[lo + child] = arr[lo + child], arr[lo + r]
            xc += 1
            r = child
    for end in range(n - 1, 0, -1):
        arr[lo], arr[lo + end] = arr[lo + end], arr[lo]
        xc += 1
        r = 0
        while True:
            child = 2 * r + 1
            if child >= end:
                break
            if child + 1 < end and (arr[lo + child] >> pb) < (arr[lo + child + 1] >> pb):
                child += 1
            if (arr[lo + r] >> pb) >= (arr[lo + child] >> pb):
                break
            arr[lo + r], arr[lo + child] = arr[lo + child], arr[lo + r]
            xc += 1
            r = child
    if stats is not None:
        stats.exchanges += xc


def _partition3(arr, lo, hi, pivot_key, pb, stats: ReadonlyStats | None = None):
    """Exchange-only three-way partition by key; returns (lt_end, gt_lo)."""
    i = lo
    lt = lo
    gt = hi
    xc = 0
    while i < gt:
        k = arr[i] >> pb
        if k < pivot_key:
            if i != lt:
                arr[i], arr[lt] = arr[lt], arr[i]
                xc += 1
            i += 1
            lt += 1
        elif k > pivot_key:
            gt -= 1
            arr[i], arr[gt] = arr[gt], arr[i]
            xc += 1
        else:
            i += 1
    if stats is not None:
        stats.exchanges += xc
    return lt, gt


def select_kth_inplace(
    arr: list[int],
    lo: int,
    n: int,
    k: int,
    spec: KeySpec,
    stats: ReadonlyStats | None = None,
) -> int:
    """Key of the rank-k element (1-based) of arr[lo:lo+n]; the region
    is left three-way partitioned around that key.  Deterministic
    pivots from medians of three sample triples; degenerates to a
    heapsort after too many rounds, giving an O(n log n) worst case."""
    if not 1 <= k <= n:
        raise ContractViolationError(f"rank {k} outside 1..{n}")
    pb = spec.payload_bits
    a, b = lo, lo + n
    want = lo + k - 1
    rounds = 2 * n.bit_length() + 4
    answer = None
    while answer is None:
        if b - a <= _SELECT_BASE or rounds == 0:
            if stats is not None:
                stats.heapsort_fallbacks += rounds == 0
            _heapsort_keys(arr, a, b - a, pb, stats)
            answer = arr[want] >> pb
            break
        rounds -= 1
        third = (b - a) // 3
        p1 = _median3(arr, a, a + third // 2, a + third - 1, pb)
        p2 = _median3(arr, a + third, a + third + third // 2, a + 2 * third - 1, pb)
        p3 = _median3(arr, a + 2 * third, b - 1 - third // 2, b - 1, pb)
        pivot = p1 + p2 + p3 - min(p1, p2, p3) - max(p1, p2, p3)
        lt, gt = _partition3(arr, a, b, pivot, pb, stats)
        if want < lt:
            b = lt
        elif want < gt:
            answer = pivot
            break
        else:
            a = gt
    _partition3(arr, lo, lo + n, answer, pb, stats)
    return answer


def partition_inplace(
    arr: list[int],
    lo: int,
    n: int,
    pivot_key: int,
    spec: KeySpec,
    stats: ReadonlyStats | None = None,
) -> int:
    """Unstable exchange-only partition: keys below ``pivot_key`` first.
    Returns the split index (first position not below)."""
    lt, _ = _partition3(arr, lo, lo + n, pivot_key, spec.payload_bits, stats)
    return lt


# ---------------------------------------------------------------------------
# Structure builders
# ---------------------------------------------------------------------------


def build_bit_memory(
    arr: list[int],
    spec: KeySpec,
    alpha_frac: int = 2,
    lo: int = 0,
    hi: int | None = None,
    stats: ReadonlyStats | None = None,
):
    """Carve m = alpha_frac * ceil(n / log2 n) encoding pairs off the
    value extremes of arr[lo:hi).

    Returns (bitmem, x_lo, x_hi): the bit memory over the end zones and
    the middle working region.  Returns (None, lo, hi) as a fallback
    signal when the key distribution leaves no workable middle; the
    region's keys are then too degenerate for pairs and the caller
    sorts directly.
    """
    if hi is None:
        hi = len(arr)
    n = hi - lo
    lg = max(1, n.bit_length() - 1)
    m = alpha_frac * -(-n // lg)
    if 2 * m + 2 > n:
        return None, lo, hi
    pb = spec.payload_bits

    k1 = select_kth_inplace(arr, lo, n, m, spec, stats)
    _, gt1 = _partition3(arr, lo, lo + n, k1, pb, stats)
    left_end = gt1  # everything with key <= k1
    if (lo + n) - left_end < m + 1:
        return None, lo, hi  # too many small equals
    rest = lo + n - left_end
    k2 = select_kth_inplace(arr, left_end, rest, rest - m + 1, spec, stats)
    lt2, _ = _partition3(arr, left_end, lo + n, k2, pb, stats)
    right_start = lt2  # everything with key >= k2
    if right_start <= left_end or (lo + n) - right_start < m:
        return None, lo, hi
    bitmem = BitMemory(arr, lo, lo + n - m, m, spec, stats)
    return bitmem, left_end, right_start


def build_exchange_buffer(
    arr: list[int],
    lo: int,
    n: int,
    spec: KeySpec,
    stats: ReadonlyStats | None = None,
):
    """Median-split arr[lo:lo+n) into A B C (keys <, =, > the rank
    ceil(n/2) key); returns (a_lo, a_hi, ExchangeMemory over BC)."""
    if n < 1:
        raise ContractViolationError("empty region")
    pb = spec.payload_bits
    med = select_kth_inplace(arr, lo, n, -(-n // 2), spec, stats)
    lt, _ = _partition3(arr, lo, lo + n, med, pb, stats)
    mem = ExchangeMemory(arr, lt, lo + n - lt - 1, spec)
    return lo, lt, mem


# ---------------------------------------------------------------------------
# Pseudo-pointer bucket sort for one short sequence
# ---------------------------------------------------------------------------


def pseudo_pointer_sort(
    arr: list[int],
    i_lo: int,
    i_len: int,
    pools: PointerPools,
    mem: ExchangeMemory,
    h_lo: int,
    l_lo: int,
    r_lo: int,
    spec: KeySpec,
    stats: ReadonlyStats | None = None,
) -> None:
    """Sort the i_len <= d elements at arr[i_lo:] into arr[r_lo:...] (a
    run of empty exchange slots), using the pools plus the H (one slot
    per key value) and L (two slots per key value) areas.

    Elements leave their input positions (placeholders arrive there)
    and appear in R in nondecreasing key order, equal keys in reverse
    insertion order.  H and L end empty and the pointer pool ends as a
    permutation of itself.
    """
    if i_len > pools.d:
        raise ContractViolationError("more input elements than pointers")
    pb = spec.payload_bits
    sep = mem.sep_key
    xc = 0

    # Insert: chain each element under its key's bucket head.  H[key]
    # holds the newest pseudo pointer p; L[key(p)] holds that element
    # and, behind it, the previously newest pointer.
    p_cursor = pools.pointer_lo
    for i in range(i_lo, i_lo + i_len):
        s = arr[i] >> pb
        if s >= sep:
            raise ContractViolationError("input element is not below the separator")
        h_slot = h_lo + s
        p_key = arr[p_cursor] >> pb
        l_first = l_lo + 2 * p_key
        if arr[h_slot] >> pb >= sep:  # bucket empty
            arr[h_slot], arr[p_cursor] = arr[p_cursor], arr[h_slot]
            arr[i], arr[l_first] = arr[l_first], arr[i]
            xc += 2
        else:
            arr[i], arr[l_first] = arr[l_first], arr[i]
            arr[h_slot], arr[l_first + 1] = arr[l_first + 1], arr[h_slot]
            arr[h_slot], arr[p_cursor] = arr[p_cursor], arr[h_slot]
            xc += 3
        p_cursor += 1

    # Drain: walk the guides in key order, unwinding each chain.
    out = r_lo
    restore = pools.pointer_lo
    for gi in range(pools.guide_lo, pools.guide_lo + pools.d):
        h_slot = h_lo + (arr[gi] >> pb)
        if arr[h_slot] >> pb >= sep:
            continue
        while True:
            l_first = l_lo + 2 * (arr[h_slot] >> pb)
            arr[out], arr[l_first] = arr[l_first], arr[out]
            out += 1
            xc += 1
            second = l_first + 1
            if arr[second] >> pb < sep:  # another pointer is chained
                arr[h_slot], arr[second] = arr[second], arr[h_slot]
                arr[restore], arr[second] = arr[second], arr[restore]
                restore += 1
                xc += 2
            else:
                arr[restore], arr[h_slot] = arr[h_slot], arr[restore]
                restore += 1
                xc += 1
                break
    if out - r_lo != i_len:
        raise InternalInvariantError("bucket drain lost elements")
    if stats is not None:
        stats.exchanges += xc


# ---------------------------------------------------------------------------
# Slab bucket sort
# ---------------------------------------------------------------------------


def slab_bucket_sort(
    arr: list[int],
    s_lo: int,
    n_s: int,
    bitmem: BitMemory,
    mem: ExchangeMemory,
    arena_lo: int,
    slab_words: int,
    max_slabs: int,
    spec: KeySpec,
    run_aware: bool = True,
    stats: ReadonlyStats | None = None,
) -> None:
    """Bucket sort arr[s_lo:s_lo+n_s] by key through slab lists in the
    exchange memory.  Bucket directories (head slab id, head fill count,
    next-slab links) live in the bit memory; with ``run_aware`` the head
    position stays in plain words while one equal-key run lasts and is
    flushed to the bit memory once per run."""
    if n_s <= 0:
        return
    pb = spec.payload_bits
    r = spec.key_universe
    sigma = slab_words
    id_width = (max_slabs + 1).bit_length()
    cnt_width = (sigma + 1).bit_length()
    bitmem.allocate("slab_head", r, id_width)
    bitmem.allocate("slab_cnt", r, cnt_width)
    bitmem.allocate("slab_next", max_slabs + 1, id_width)
    bitmem.zero_field("slab_head")
    bitmem.zero_field("slab_cnt")
    bitmem.zero_field("slab_next")

    alloc = 0
    xc = 0
    flushes = 0
    cur_key = -1
    cur_slab = 0
    cur_cnt = 0
    for i in range(s_lo, s_lo + n_s):
        k = arr[i] >> pb
        if k != cur_key or not run_aware:
            if cur_key >= 0:
                bitmem.write_field("slab_head", cur_key, cur_slab)
                bitmem.write_field("slab_cnt", cur_key, cur_cnt)
                flushes += 1
            cur_key = k
            cur_slab = bitmem.read_field("slab_head", k)
            cur_cnt = bitmem.read_field("slab_cnt", k)
        if cur_slab == 0 or cur_cnt == sigma:
            alloc += 1
            if alloc > max_slabs:
                raise InternalInvariantError("slab arena exhausted")
            bitmem.write_field("slab_next", alloc, cur_slab)
            cur_slab = alloc
            cur_cnt = 0
        slot = arena_lo + (cur_slab - 1) * sigma + cur_cnt
        arr[i], arr[slot] = arr[slot], arr[i]
        xc += 1
        cur_cnt += 1
    if cur_key >= 0:
        bitmem.write_field("slab_head", cur_key, cur_slab)
        bitmem.write_field("slab_cnt", cur_key, cur_cnt)
        flushes += 1

    out = s_lo
    for k in range(r):
        sid = bitmem.read_field("slab_head", k)
        cnt = bitmem.read_field("slab_cnt", k)
        while sid:
            base = arena_lo + (sid - 1) * sigma
            for j in range(cnt):
                arr[out], arr[base + j] = arr[base + j], arr[out]
                out += 1
            xc += cnt
            sid = bitmem.read_field("slab_next", sid)
            cnt = sigma
    if out != s_lo + n_s:
        raise InternalInvariantError("slab drain lost elements")
    if stats is not None:
        stats.exchanges += xc
        stats.head_flushes += flushes


# ---------------------------------------------------------------------------
# Distinct-key pool extraction
# ---------------------------------------------------------------------------


def extract_distinct_sets(
    arr: list[int],
    a_lo: int,
    n_a: int,
    bitmem: BitMemory,
    spec: KeySpec,
    stats: ReadonlyStats | None = None,
):
    """Reshape arr[a_lo : a_lo+n_a] as [singletons | G | P | S'].

    Keys occurring exactly once are swapped to the front and sorted;
    one guide and one pointer element per remaining distinct key are
    collected next, guides sorted.  Returns (singles_len, PointerPools,
    s_lo, n_s).  Allocates seen/dup/taken bit arrays in the bit memory.
    """
    pb = spec.payload_bits
    r = spec.key_universe
    bitmem.allocate("seen", r, 1)
    bitmem.allocate("dup", r, 1)
    bitmem.allocate("gtaken", r, 1)
    bitmem.allocate("ptaken", r, 1)
    seen_off = bitmem.layout["seen"][0]
    dup_off = bitmem.layout["dup"][0]
    g_off = bitmem.layout["gtaken"][0]
    p_off = bitmem.layout["ptaken"][0]
    for name in ("seen", "dup", "gtaken", "ptaken"):
        bitmem.zero_field(name)

    # Hot loops work on the encoding pairs directly: bit i is set when
    # the pair (lb+i, rb+i) is in decreasing key order.
    lb = bitmem.left_base
    rb = bitmem.right_base
    xc = 0
    reads = 0
    writes = 0
    for i in range(a_lo, a_lo + n_a):
        k = arr[i] >> pb
        li = lb + seen_off + k
        ri = rb + seen_off + k
        reads += 1
        if arr[li] >> pb > arr[ri] >> pb:  # seen already: mark duplicate
            lj = lb + dup_off + k
            rj = rb + dup_off + k
            writes += 1
            if arr[lj] >> pb <= arr[rj] >> pb:
                arr[lj], arr[rj] = arr[rj], arr[lj]
                xc += 1
        else:
            arr[li], arr[ri] = arr[ri], arr[li]
            writes += 1
            xc += 1

    cursor = a_lo
    for i in range(a_lo, a_lo + n_a):
        k = arr[i] >> pb
        reads += 1
        if arr[lb + dup_off + k] >> pb <= arr[rb + dup_off + k] >> pb:
            if i != cursor:
                arr[i], arr[cursor] = arr[cursor], arr[i]
                xc += 1
            cursor += 1
    singles = cursor - a_lo
    _heapsort_keys(arr, a_lo, singles, pb, stats)

    g_lo = cursor
    for i in range(cursor, a_lo + n_a):
        k = arr[i] >> pb
        li = lb + g_off + k
        ri = rb + g_off + k
        reads += 1
        if arr[li] >> pb <= arr[ri] >> pb:
            arr[li], arr[ri] = arr[ri], arr[li]
            writes += 1
            xc += 1
            if i != cursor:
                arr[i], arr[cursor] = arr[cursor], arr[i]
                xc += 1
            cursor += 1
    d = cursor - g_lo
    _heapsort_keys(arr, g_lo, d, pb, stats)

    p_lo = cursor
    for i in range(cursor, a_lo + n_a):
        k = arr[i] >> pb
        li = lb + p_off + k
        ri = rb + p_off + k
        reads += 1
        if arr[li] >> pb <= arr[ri] >> pb:
            arr[li], arr[ri] = arr[ri], arr[li]
            writes += 1
            xc += 1
            if i != cursor:
                arr[i], arr[cursor] = arr[cursor], arr[i]
                xc += 1
            cursor += 1
    bitmem.stats.bit_reads += reads
    bitmem.stats.bit_writes += writes
    bitmem.stats.exchanges += 0  # pair flips are counted in xc below
    if cursor - p_lo != d:
        raise InternalInvariantError("guide and pointer pools disagree")
    if stats is not None:
        stats.exchanges += xc
    pools = PointerPools(guide_lo=g_lo, pointer_lo=p_lo, d=d)
    return singles, pools, cursor, a_lo + n_a - cursor


# ---------------------------------------------------------------------------
# Driver helpers
# ---------------------------------------------------------------------------


def _buffer_merge(arr, lo, mid, hi, w_lo, pb, stats: ReadonlyStats | None = None):
    """Exchange-only linear merge of sorted arr[lo:mid) and arr[mid:hi)
    through mid-lo empty working slots at w_lo."""
    n1 = mid - lo
    if n1 == 0 or hi == mid:
        return
    xc = n1
    for i in range(n1):
        arr[lo + i], arr[w_lo + i] = arr[w_lo + i], arr[lo + i]
    i = 0
    j = mid
    out = lo
    while i < n1:
        if j < hi and arr[j] >> pb < arr[w_lo + i] >> pb:
            arr[out], arr[j] = arr[j], arr[out]
            j += 1
        else:
            arr[out], arr[w_lo + i] = arr[w_lo + i], arr[out]
            i += 1
        out += 1
        xc += 1
    if stats is not None:
        stats.exchanges += xc


def _phase2_bits(r, d, t, n_s, sigma):
    """Bit demand of group counters plus the slab directory."""
    frame_cap = t + 6
    cnt_width = (2 * d + 1).bit_length()
    max_slabs = -(-max(n_s, 1) // sigma) + d
    id_width = (max_slabs + 1).bit_length()
    return (
        frame_cap * cnt_width
        + r * (id_width + (sigma + 1).bit_length())
        + (max_slabs + 1) * id_width
    )


def _plan_part(n_part, w_len, r, t, bits_free, n_region):
    """Slab size for sorting n_part elements in w_len slots, or None.

    The slab arena needs the elements themselves plus up to one
    partially filled slab per bucket, so the slab size shrinks below
    the log-squared default when key-indexed waste would not fit."""
    d_cap = min(r, n_part)
    frames = (t + 6) * (2 * d_cap + 1)
    step2 = 3 * r + d_cap + frames
    if step2 + 4 > w_len:
        return None
    lg = max(2, n_region.bit_length() - 1)
    sigma = min(lg * lg, max(4, (w_len - n_part - 8) // (d_cap + 1)))
    while sigma >= 4:
        arena = n_part + (-(-n_part // sigma) + d_cap) * sigma
        if arena + 4 <= w_len and 4 * r + _phase2_bits(
            r, d_cap, t, n_part, sigma
        ) <= bits_free:
            return sigma
        sigma //= 2
    return None


# ---------------------------------------------------------------------------
# Group distribution (step two)
# ---------------------------------------------------------------------------


class _GroupArena:
    """Pivot-ordered groups of up to 2d elements living in exchange
    frames.  Each frame seats its pivot (upper bound) element at slot 0;
    an empty seat means no upper bound.  Sizes are mirrored in plain
    words for the walk and kept authoritatively in the bit memory via
    unit increments."""

    def __init__(self, arr, fr_lo, d, frame_cap, bitmem, mem, pb, stats):
        self.arr = arr
        self.fr_lo = fr_lo
        self.d = d
        self.stride = 2 * d + 1
        self.cap = frame_cap
        self.bitmem = bitmem
        self.mem = mem
        self.pb = pb
        self.stats = stats
        self.order: list[int] = [0]
        self.free = list(range(frame_cap - 1, 0, -1))
        self.sizes = [0] * frame_cap
        bitmem.allocate("group_size", frame_cap, (2 * d + 1).bit_length())
        bitmem.zero_field("group_size")

    def slot(self, f, j):
        return self.fr_lo + f * self.stride + j

    def pivot_key(self, f):
        x = self.arr[self.slot(f, 0)] >> self.pb
        return x if x < self.mem.sep_key else None

    def insert(self, g, pos):
        """Place arr[pos] into the first group at or after walk index g
        that accepts it; returns the new walk index, or -1 when a split
        was needed and no frame was free (caller drains early)."""
        arr = self.arr
        k = arr[pos] >> self.pb
        order = self.order
        sizes = self.sizes
        while True:
            f = order[g]
            if sizes[f] < 2 * self.d:
                pk = self.pivot_key(f)
                if pk is None or k <= pk:
                    break
            g += 1
        s = self.slot(f, 1 + sizes[f])
        arr[pos], arr[s] = arr[s], arr[pos]
        self.bitmem.counter_add1("group_size", f)
        sizes[f] += 1
        if self.stats is not None:
            self.stats.exchanges += 1
        if sizes[f] == 2 * self.d and not self._split(g):
            return -1
        return g

    def _split(self, g):
        arr = self.arr
        pb = self.pb
        f = self.order[g]
        size = self.sizes[f]
        if not self.free:
            return False
        lo = self.slot(f, 1)
        spec_like = _SpecView(pb)
        med = select_kth_inplace(arr, lo, size, (size + 1) // 2, spec_like, self.stats)
        lt, gt = _partition3(arr, lo, lo + size, med, pb, self.stats)
        n_lt = lt - lo
        n_le = gt - lo
        if n_le < size:
            cut = n_le  # left keeps keys <= med; its max is a med element
        elif n_lt > 0:
            cut = n_lt  # all >= med are equal; left keeps keys < med
        else:
            # All 2d elements share one key; no value can split them and
            # a twin group would break the pivot-interval order for
            # later blocks.  Signal the caller to drain early instead.
            return False
        nf = self.free.pop()
        if self.stats is not None:
            self.stats.group_splits += 1
        move = size - cut
        for j in range(move):
            a, b = self.slot(f, 1 + cut + j), self.slot(nf, 1 + j)
            arr[a], arr[b] = arr[b], arr[a]
        if self.stats is not None:
            self.stats.exchanges += move
        # the old upper bound (if seated) now bounds the right part
        if arr[self.slot(f, 0)] >> pb < self.mem.sep_key:
            a, b = self.slot(f, 0), self.slot(nf, 0)
            arr[a], arr[b] = arr[b], arr[a]
            if self.stats is not None:
                self.stats.exchanges += 1
        # seat the left part's maximum as its pivot
        mi = 0
        mk = -1
        for j in range(cut):
            kj = arr[self.slot(f, 1 + j)] >> pb
            if kj >= mk:
                mk = kj
                mi = j
        a, b = self.slot(f, 1 + mi), self.slot(f, cut)
        if a != b:
            arr[a], arr[b] = arr[b], arr[a]
        a, b = self.slot(f, 0), self.slot(f, cut)
        arr[a], arr[b] = arr[b], arr[a]
        if self.stats is not None:
            self.stats.exchanges += 2
        self.sizes[f] = cut - 1
        self.sizes[nf] = move
        self.bitmem.write_field("group_size", f, cut - 1)
        self.bitmem.write_field("group_size", nf, move)
        self.order.insert(g + 1, nf)
        return True

    def drain(self, out, pools, h_lo, l_lo, r_lo, spec):
        """Sort every group and write them back, in pivot order, to the
        positions starting at ``out``; frames end empty.  Returns the
        position after the last written element."""
        arr = self.arr
        pb = self.pb
        for f in self.order:
            size = self.sizes[f]
            seated = arr[self.slot(f, 0)] >> pb < self.mem.sep_key
            if seated and size < 2 * self.d:  # room to fold the pivot in
                a, b = self.slot(f, 0), self.slot(f, 1 + size)
                arr[a], arr[b] = arr[b], arr[a]
                size += 1
                seated = False
                if self.stats is not None:
                    self.stats.exchanges += 1
            if size == 0 and not seated:
                continue
            first = min(size, self.d)
            pseudo_pointer_sort(
                arr, self.slot(f, 1), first, pools, self.mem, h_lo, l_lo, r_lo,
                spec, self.stats,
            )
            for j in range(first):
                arr[out + j], arr[r_lo + j] = arr[r_lo + j], arr[out + j]
            rest = size - first
            if rest:
                pseudo_pointer_sort(
                    arr, self.slot(f, 1 + first), rest, pools, self.mem,
                    h_lo, l_lo, r_lo, spec, self.stats,
                )
                for j in range(rest):
                    arr[out + first + j], arr[r_lo + j] = (
                        arr[r_lo + j],
                        arr[out + first + j],
                    )
                _buffer_merge(arr, out, out + first, out + size, r_lo, pb, self.stats)
            if self.stats is not None:
                self.stats.exchanges += size
            out += size
            if seated:  # pivot of a full frame: largest, so it goes last
                a, b = self.slot(f, 0), out
                arr[a], arr[b] = arr[b], arr[a]
                out += 1
                if self.stats is not None:
                    self.stats.exchanges += 1
            self.bitmem.write_field("group_size", f, 0)
            self.sizes[f] = 0
        self.order = [0]
        self.free = [f for f in range(self.cap - 1, 0, -1)]
        return out


class _SpecView:
    """Minimal KeySpec stand-in carrying just the payload width."""

    def __init__(self, pb):
        self.payload_bits = pb


# ---------------------------------------------------------------------------
# The driver
# ---------------------------------------------------------------------------


def sort_readonly(
    arr: list[int],
    spec: KeySpec,
    probe: AllocationProbe | None = None,
    lo: int = 0,
    hi: int | None = None,
    alpha_frac: int | None = None,
    stats: ReadonlyStats | None = None,
) -> None:
    """Sort arr[lo:hi] by key using exchanges only; key bits are never
    written.  Unstable.  The key universe must satisfy
    key_universe**2 <= max(n, 4096): the machinery needs key-indexed
    slot areas much smaller than the region.  O(1) auxiliary words."""
    if hi is None:
        hi = len(arr)
    n = hi - lo
    if probe is not None:
        probe.acquire(READONLY_WORKSPACE_WORDS)
    try:
        if n <= 1:
            return
        if spec.key_universe ** 2 > max(n, 4096):
            raise UnsupportedRegimeError(
                f"key universe {spec.key_universe} too large for a region of {n}"
            )
        pb = spec.payload_bits
        if n <= _SMALL_REGION:
            _heapsort_keys(arr, lo, n, pb, stats)
            return

        strict = alpha_frac is not None
        if alpha_frac is None:
            alpha_frac = 2
        lg = max(1, n.bit_length() - 1)
        m = alpha_frac * -(-n // lg)
        min_bits = 4 * spec.key_universe + 96
        if m < min_bits:
            if strict:
                raise CapacityError(
                    f"alpha_frac={alpha_frac} yields {m} encoded bits; at "
                    f"least {min_bits} are needed for this key universe"
                )
            alpha_frac = -(-min_bits * lg // n) + 1
            m = alpha_frac * -(-n // lg)
        if 2 * m + 2 > n:
            _heapsort_keys(arr, lo, n, pb, stats)
            return

        bitmem, x_lo, x_hi = build_bit_memory(arr, spec, alpha_frac, lo, hi, stats)
        if bitmem is None:
            _heapsort_keys(arr, lo, n, pb, stats)
            return

        region_lo, region_hi = x_lo, x_hi
        while region_hi - region_lo > _SMALL_REGION:
            a_lo, a_hi, mem = build_exchange_buffer(
                arr, region_lo, region_hi - region_lo, spec, stats
            )
            if a_hi - a_lo >= 2:
                _sort_with_buffer(arr, a_lo, a_hi, mem, bitmem, spec, stats)
            # BC splits into the (sorted) equal block and the remainder.
            _, gt_lo = _partition3(arr, mem.sep_index, region_hi, mem.sep_key, pb, stats)
            if gt_lo >= region_hi:
                region_lo = region_hi
                break
            region_lo = gt_lo
        if region_hi - region_lo > 1:
            _heapsort_keys(arr, region_lo, region_hi - region_lo, pb, stats)

        # Teardown: restore every pair to increasing order so the zones
        # are key-separated again, then order them.
        for i in range(bitmem.m):
            bitmem.write_bit(i, 0)
        _heapsort_keys(arr, lo, x_lo - lo, pb, stats)
        _heapsort_keys(arr, x_hi, hi - x_hi, pb, stats)
    finally:
        if probe is not None:
            probe.release(READONLY_WORKSPACE_WORDS)


def _sort_with_buffer(arr, a_lo, a_hi, mem, bitmem, spec, stats):
    """Sort arr[a_lo:a_hi) (all keys below the separator) using the
    exchange memory; splits into up to 8 parts when one part's areas do
    not fit, folding the sorted parts back together through the buffer."""
    pb = spec.payload_bits
    n_a = a_hi - a_lo
    r = spec.key_universe
    t = max(2, min(8, (max(4, n_a.bit_length() - 1)).bit_length()))
    bitmem.reset_layout()
    parts = 1
    sigma = None
    while parts <= 8:
        sigma = _plan_part(-(-n_a // parts), mem.length, r, t, bitmem.m, n_a)
        if sigma is not None:
            break
        parts *= 2
    if sigma is None or n_a <= max(2 * _SMALL_REGION, 4 * r):
        _heapsort_keys(arr, a_lo, n_a, pb, stats)
        if stats is not None:
            stats.heapsort_fallbacks += 1
        return
    per = -(-n_a // parts)
    starts = list(range(a_lo, a_hi, per)) + [a_hi]
    for idx in range(len(starts) - 1):
        _sort_part(arr, starts[idx], starts[idx + 1], mem, bitmem, spec, t, sigma, stats)
    merged_hi = starts[1]
    for idx in range(1, len(starts) - 1):
        _buffer_merge(arr, a_lo, merged_hi, starts[idx + 1], mem.base, pb, stats)
        merged_hi = starts[idx + 1]


def _sort_part(arr, p_lo, p_hi, mem, bitmem, spec, t, sigma, stats):
    """The three-step key-indexed sort of one part inside the buffer."""
    pb = spec.payload_bits
    n_p = p_hi - p_lo
    if n_p <= 1:
        return
    r = spec.key_universe

    bitmem.reset_layout()
    singles, pools, s_lo, n_s = extract_distinct_sets(arr, p_lo, n_p, bitmem, spec, stats)
    d = pools.d
    if d > 0 and n_s > 0:
        h_lo = mem.base
        l_lo = h_lo + r
        r_lo = l_lo + 2 * r
        fr_lo = r_lo + d
        _distribute_batches(
            arr, s_lo, n_s, pools, mem, bitmem, h_lo, l_lo, r_lo, fr_lo, t, spec, stats
        )
        max_slabs = -(-n_s // sigma) + d
        slab_bucket_sort(
            arr, s_lo, n_s, bitmem, mem, mem.base, sigma, max_slabs,
            spec, run_aware=True, stats=stats,
        )

    zone = singles + 2 * pools.d
    _heapsort_keys(arr, p_lo, zone, pb, stats)
    if n_s:
        _buffer_merge(arr, p_lo, s_lo, p_hi, mem.base, pb, stats)


def _distribute_batches(
    arr, s_lo, n_s, pools, mem, bitmem, h_lo, l_lo, r_lo, fr_lo, t, spec, stats
):
    """Step two: sort d-element blocks with the pointer pools, then
    distribute each batch of t blocks into pivot-ordered groups and
    write it back sorted.  When duplicate-heavy input exhausts the
    frames mid-batch, the groups are drained early and the resulting
    sorted pieces are folded together at batch end."""
    pb = spec.payload_bits
    d = pools.d
    arena = _GroupArena(arr, fr_lo, d, t + 6, bitmem, mem, pb, stats)

    batch_lo = s_lo
    while batch_lo < s_lo + n_s:
        batch_hi = min(batch_lo + t * d, s_lo + n_s)
        pos = batch_lo
        while pos < batch_hi:
            blk = min(d, batch_hi - pos)
            pseudo_pointer_sort(arr, pos, blk, pools, mem, h_lo, l_lo, r_lo, spec, stats)
            for j in range(blk):
                arr[pos + j], arr[r_lo + j] = arr[r_lo + j], arr[pos + j]
            if stats is not None:
                stats.exchanges += blk
            pos += blk

        out = batch_lo
        piece_bounds = [batch_lo]
        pos = batch_lo
        while pos < batch_hi:
            blk_end = min(pos + d, batch_hi)
            g = 0
            for i in range(pos, blk_end):
                g = arena.insert(g, i)
                if g < 0:
                    # The element landed before the failed split; drain
                    # everything inserted so far as one sorted piece.
                    out = arena.drain(out, pools, h_lo, l_lo, r_lo, spec)
                    if out != i + 1:
                        raise InternalInvariantError("early drain miscounted")
                    piece_bounds.append(out)
                    if stats is not None:
                        stats.early_drains += 1
                    g = 0  # pivot order restarted; rescan from the front
            pos = blk_end
        out = arena.drain(out, pools, h_lo, l_lo, r_lo, spec)
        piece_bounds.append(out)
        if out != batch_hi:
            raise InternalInvariantError("batch write-back lost elements")
        for idx in range(1, len(piece_bounds) - 1):
            _buffer_merge(
                arr, batch_lo, piece_bounds[idx], piece_bounds[idx + 1], fr_lo, pb, stats
            )
        batch_lo = batch_hi
