import random
from collections import Counter

import pytest

from flatsort.errors import ContractViolationError, UnsupportedRegimeError
from flatsort.readonly_sort import (
    READONLY_WORKSPACE_WORDS,
    BitMemory,
    ExchangeMemory,
    PointerPools,
    ReadonlyStats,
    build_bit_memory,
    build_exchange_buffer,
    extract_distinct_sets,
    partition_inplace,
    pseudo_pointer_sort,
    select_kth_inplace,
    slab_bucket_sort,
    sort_readonly,
)
from flatsort.word_model import AllocationProbe, KeySpec, pack

W16P8 = KeySpec(word_bits=16, key_bits=8)


class ExchangeOnlyList(list):
    """Write-intercepting array: every stored word must have been loaded
    from the array earlier, which exchange-only algorithms satisfy."""

    def __init__(self, data):
        super().__init__(data)
        self.loads = Counter()
        self.violations = 0

    def __getitem__(self, i):
        v = list.__getitem__(self, i)
        if isinstance(i, int):
            self.loads[v] += 1
        return v

    def __setitem__(self, i, v):
        if self.loads[v] <= 0:
            self.violations += 1
        else:
            self.loads[v] -= 1
        list.__setitem__(self, i, v)


def keys_of(arr, spec):
    return [spec.key_of(x) for x in arr]


def make_vals(rng, n, key_bits, spec):
    return [
        pack(rng.randrange(1 << key_bits), i & spec.payload_mask, spec)
        for i in range(n)
    ]


# -- selection / partition ---------------------------------------------------


def test_select_examples():
    spec = KeySpec(word_bits=16, key_bits=16)
    arr = [5, 1, 4, 2, 3]
    assert select_kth_inplace(arr, 0, 5, 2, spec) == 2
    arr = [7, 7, 7, 7]
    for k in range(1, 5):
        assert select_kth_inplace(arr, 0, 4, k, spec) == 7
    with pytest.raises(ContractViolationError):
        select_kth_inplace(arr, 0, 4, 5, spec)


def test_select_matches_sorted_oracle():
    spec = KeySpec(word_bits=16, key_bits=16)
    rng = random.Random(3)
    for _ in range(100):
        n = rng.randint(1, 500)
        vals = [rng.randrange(64) for _ in range(n)]
        k = rng.randint(1, n)
        arr = list(vals)
        got = select_kth_inplace(arr, 0, n, k, spec)
        assert got == sorted(vals)[k - 1]
        assert Counter(arr) == Counter(vals)
        # region is partitioned around the answer
        split = arr.index(got) if got in arr else 0
        assert all(x < got for x in arr[: [y >= got for y in arr].index(True)])


def test_select_large_trials_vs_oracle():
    spec = KeySpec(word_bits=32, key_bits=16)
    rng = random.Random(4)
    for _ in range(100):
        n = 10_000
        vals = [rng.randrange(1 << 16) << 16 for _ in range(n)]
        k = rng.randint(1, n)
        arr = list(vals)
        assert select_kth_inplace(arr, 0, n, k, spec) == sorted(vals)[k - 1] >> 16


def test_partition_inplace():
    spec = KeySpec(word_bits=16, key_bits=16)
    rng = random.Random(5)
    for _ in range(60):
        n = rng.randint(1, 300)
        vals = [rng.randrange(32) for _ in range(n)]
        pivot = rng.randrange(33)
        arr = list(vals)
        split = partition_inplace(arr, 0, n, pivot, spec)
        assert all(x < pivot for x in arr[:split])
        assert all(x >= pivot for x in arr[split:])
        assert Counter(arr) == Counter(vals)


# -- bit memory ---------------------------------------------------------------


def build_test_bitmem(m=64, spec=W16P8):
    # explicit pairs: left keys 0..m-1 (payload marks them), right keys 128+
    arr = [pack(i % 100, i & 0xFF, spec) for i in range(m)] + [
        pack(128 + i % 100, i & 0xFF, spec) for i in range(m)
    ]
    return arr, BitMemory(arr, 0, m, m, spec)


def test_bits_read_zero_initially_and_roundtrip():
    arr, bm = build_test_bitmem()
    assert all(bm.read_bit(i) == 0 for i in range(bm.m))
    shadow = [0] * bm.m
    rng = random.Random(6)
    snapshot = Counter(arr)
    for _ in range(2000):
        i = rng.randrange(bm.m)
        v = rng.randint(0, 1)
        bm.write_bit(i, v)
        shadow[i] = v
        assert bm.read_bit(i) == v
    assert [bm.read_bit(i) for i in range(bm.m)] == shadow
    assert Counter(arr) == snapshot


def test_write_is_idempotent_single_swap():
    arr, bm = build_test_bitmem()
    before = list(arr)
    bm.write_bit(3, 1)
    after_one = list(arr)
    bm.write_bit(3, 1)
    assert arr == after_one != before
    bm.write_bit(3, 0)
    assert arr == before


def test_fields_and_counter_amortization():
    arr, bm = build_test_bitmem(m=128)
    bm.allocate("cnt", 1, 17)
    bm.zero_field("cnt")
    touched = 0
    for _ in range(2**10):
        touched += bm.counter_add1("cnt")
    assert bm.read_field("cnt") == 2**10
    assert touched <= 2**11 + 17
    bm.write_field("cnt", 0, 0x155AA & ((1 << 17) - 1))
    assert bm.read_field("cnt") == 0x155AA & ((1 << 17) - 1)


def test_bit_memory_out_of_range():
    arr, bm = build_test_bitmem()
    with pytest.raises(ContractViolationError):
        bm.read_bit(bm.m)
    with pytest.raises(ContractViolationError):
        bm.write_bit(-1, 0)


# -- construction from an array ----------------------------------------------


def test_build_bit_memory_distinct_keys():
    spec = KeySpec(word_bits=16, key_bits=8)
    rng = random.Random(7)
    n = 4096
    vals = make_vals(rng, n, 8, spec)
    arr = list(vals)
    bm, x_lo, x_hi = build_bit_memory(arr, spec, alpha_frac=1)
    assert bm is not None
    assert x_hi - x_lo >= 1
    assert all(bm.read_bit(i) == 0 for i in range(bm.m))
    assert Counter(arr) == Counter(vals)
    # pair keys are strictly separated
    for i in range(bm.m):
        assert spec.key_of(arr[i]) < spec.key_of(arr[len(arr) - bm.m + i])


def test_build_bit_memory_all_equal_falls_back():
    spec = KeySpec(word_bits=16, key_bits=8)
    arr = [pack(9, i & 0xFF, spec) for i in range(2048)]
    bm, x_lo, x_hi = build_bit_memory(arr, spec, alpha_frac=1)
    assert bm is None


def test_build_exchange_buffer_example():
    spec = KeySpec(word_bits=16, key_bits=16)
    arr = [4, 1, 3, 2]
    a_lo, a_hi, mem = build_exchange_buffer(arr, 0, 4, spec)
    assert sorted(arr[a_lo:a_hi]) == [1]
    assert arr[mem.sep_index] == 2
    assert sorted(arr[mem.sep_index :]) == [2, 3, 4]
    assert mem.is_empty(mem.sep_index + 1)


def test_exchange_buffer_emptiness_flips_on_use():
    spec = KeySpec(word_bits=16, key_bits=16)
    arr = [1, 5, 9, 7]
    a_lo, a_hi, mem = build_exchange_buffer(arr, 0, 4, spec)
    slot = mem.base
    assert mem.is_empty(slot)
    arr[a_lo], arr[slot] = arr[slot], arr[a_lo]
    assert not mem.is_empty(slot)


def test_build_exchange_buffer_all_equal():
    spec = KeySpec(word_bits=16, key_bits=16)
    arr = [3, 3, 3, 3]
    a_lo, a_hi, mem = build_exchange_buffer(arr, 0, 4, spec)
    assert a_hi == a_lo  # A empty, everything is the equal block


# -- pseudo pointers -----------------------------------------------------------


def pointer_fixture(spec, g_keys, p_keys, i_keys, slots=64):
    """Arena: [G | P | I | separator | working area]."""
    arr = []
    g_lo = 0
    arr += [pack(k, 1, spec) for k in g_keys]
    p_lo = len(arr)
    arr += [pack(k, 2, spec) for k in p_keys]
    i_lo = len(arr)
    arr += [pack(k, 3, spec) for k in i_keys]
    sep = len(arr)
    arr += [pack(200, 0, spec)] + [pack(255, i & 0xFF, spec) for i in range(slots)]
    mem = ExchangeMemory(arr, sep, slots, spec)
    pools = PointerPools(guide_lo=g_lo, pointer_lo=p_lo, d=len(g_keys))
    r = spec.key_universe
    h_lo = mem.base
    l_lo = h_lo + min(r, 200)
    r_lo = l_lo + 2 * min(r, 200)
    return arr, pools, mem, h_lo, l_lo, r_lo, i_lo


def test_pseudo_pointer_example():
    spec = W16P8
    arr, pools, mem, h_lo, l_lo, r_lo, i_lo = pointer_fixture(
        spec, [2, 4, 7], [7, 2, 4], [4, 2, 4], slots=640
    )
    before = Counter(arr)
    pseudo_pointer_sort(arr, i_lo, 3, pools, mem, h_lo, l_lo, r_lo, spec)
    assert [spec.key_of(arr[r_lo + j]) for j in range(3)] == [2, 4, 4]
    assert Counter(arr) == before
    # H and L are empty again; P holds a permutation of its pointers
    for s in range(h_lo, r_lo):
        assert mem.is_empty(s)
    p_keys = sorted(spec.key_of(arr[pools.pointer_lo + j]) for j in range(3))
    assert p_keys == [2, 4, 7]


def test_pseudo_pointer_distinct_and_singleton():
    spec = W16P8
    arr, pools, mem, h_lo, l_lo, r_lo, i_lo = pointer_fixture(
        spec, [1, 3, 5], [5, 1, 3], [5, 3, 1], slots=640
    )
    pseudo_pointer_sort(arr, i_lo, 3, pools, mem, h_lo, l_lo, r_lo, spec)
    assert [spec.key_of(arr[r_lo + j]) for j in range(3)] == [1, 3, 5]

    arr, pools, mem, h_lo, l_lo, r_lo, i_lo = pointer_fixture(
        spec, [9], [9], [9], slots=640
    )
    pseudo_pointer_sort(arr, i_lo, 1, pools, mem, h_lo, l_lo, r_lo, spec)
    assert spec.key_of(arr[r_lo]) == 9


def test_pseudo_pointer_random_bucket_oracle():
    spec = W16P8
    rng = random.Random(8)
    for _ in range(80):
        d = rng.randint(1, 24)
        keys = rng.sample(range(150), d)
        i_keys = [rng.choice(keys) for _ in range(rng.randint(1, d))]
        arr, pools, mem, h_lo, l_lo, r_lo, i_lo = pointer_fixture(
            spec, sorted(keys), rng.sample(keys, d), i_keys, slots=640
        )
        before = Counter(arr)
        pseudo_pointer_sort(arr, i_lo, len(i_keys), pools, mem, h_lo, l_lo, r_lo, spec)
        got = [spec.key_of(arr[r_lo + j]) for j in range(len(i_keys))]
        assert got == sorted(i_keys)
        assert Counter(arr) == before
        for s in range(h_lo, r_lo):
            assert mem.is_empty(s)


# -- extraction ----------------------------------------------------------------


def extraction_fixture(spec, keys):
    n = len(keys)
    vals = [pack(k, i & 0xFF, spec) for i, k in enumerate(keys)]
    m = 4 * spec.key_universe + 32
    left = [pack(0, i & 0xFF, spec) for i in range(m)]
    right = [pack(255, i & 0xFF, spec) for i in range(m)]
    arr = left + vals + right
    bm = BitMemory(arr, 0, len(arr) - m, m, KeySpec(spec.word_bits, spec.key_bits))
    return arr, bm, m, n


def test_extract_distinct_sets_counts():
    spec = KeySpec(word_bits=16, key_bits=8)
    keys = [5, 5, 3, 3, 3]
    arr, bm, m, n = extraction_fixture(spec, keys)
    singles, pools, s_lo, n_s = extract_distinct_sets(arr, m, n, bm, spec)
    assert singles == 0
    assert pools.d == 2
    g = [spec.key_of(arr[pools.guide_lo + j]) for j in range(2)]
    p = sorted(spec.key_of(arr[pools.pointer_lo + j]) for j in range(2))
    assert g == [3, 5]
    assert p == [3, 5]
    assert n_s == 1
    assert spec.key_of(arr[s_lo]) == 3


def test_extract_all_singletons():
    spec = KeySpec(word_bits=16, key_bits=8)
    keys = [9, 4, 7, 1]
    arr, bm, m, n = extraction_fixture(spec, keys)
    singles, pools, s_lo, n_s = extract_distinct_sets(arr, m, n, bm, spec)
    assert singles == 4
    assert pools.d == 0
    assert n_s == 0
    assert [spec.key_of(arr[m + j]) for j in range(4)] == [1, 4, 7, 9]


def test_extract_one_distinct_key():
    spec = KeySpec(word_bits=16, key_bits=8)
    arr, bm, m, n = extraction_fixture(spec, [6] * 6)
    singles, pools, s_lo, n_s = extract_distinct_sets(arr, m, 6, bm, spec)
    assert singles == 0 and pools.d == 1 and n_s == 4


# -- slab sort ------------------------------------------------------------------


def slab_fixture(spec, keys, sigma, run_aware=True):
    n = len(keys)
    vals = [pack(k, i & 0xFF, spec) for i, k in enumerate(keys)]
    r = spec.key_universe
    max_slabs = -(-n // sigma) + min(r, n)
    m = 4096 + 2 * r * 16 + (max_slabs + 1) * 16
    left = [pack(0, i & 0xFF, spec) for i in range(m)]
    right = [pack(63, i & 0xFF, spec) for i in range(m)]
    sep = [pack(60, 0, spec)]
    arena = [pack(62, i & 0xFF, spec) for i in range(max_slabs * sigma + 4)]
    arr = left + vals + sep + arena + right
    bm = BitMemory(arr, 0, len(arr) - m, m, spec)
    mem = ExchangeMemory(arr, m + n, len(arena), spec)
    stats = ReadonlyStats()
    slab_bucket_sort(
        arr, m, n, bm, mem, m + n + 1, sigma, max_slabs, spec,
        run_aware=run_aware, stats=stats,
    )
    return arr[m : m + n], stats


def test_slab_example_three_runs():
    spec = KeySpec(word_bits=16, key_bits=6)
    out, stats = slab_fixture(spec, [1, 1, 1, 2, 2, 3], sigma=4)
    assert [spec.key_of(x) for x in out] == [1, 1, 1, 2, 2, 3]
    assert stats.head_flushes == 3  # one bit-memory write-back per run


def test_slab_single_run_single_flush():
    spec = KeySpec(word_bits=16, key_bits=6)
    out, stats = slab_fixture(spec, [5] * 40, sigma=8)
    assert [spec.key_of(x) for x in out] == [5] * 40
    assert stats.head_flushes == 1


def test_slab_random_keys_match_oracle():
    spec = KeySpec(word_bits=16, key_bits=6)
    rng = random.Random(9)
    keys = [rng.randrange(64) for _ in range(4096)]
    out, stats = slab_fixture(spec, keys, sigma=36)
    assert [spec.key_of(x) for x in out] == sorted(keys)


def test_slab_run_aware_flush_counts():
    spec = KeySpec(word_bits=16, key_bits=6)
    keys = [1] * 30 + [2] * 30 + [1] * 30
    out, stats = slab_fixture(spec, keys, sigma=8)
    assert stats.head_flushes == 3
    out, stats = slab_fixture(spec, keys, sigma=8, run_aware=False)
    assert stats.head_flushes == len(keys)


# -- the full sort ---------------------------------------------------------------


def test_sort_readonly_small_and_trivial():
    spec = KeySpec(word_bits=16, key_bits=4)
    rng = random.Random(10)
    for n in (0, 1, 2, 7, 63, 64, 65, 200):
        vals = make_vals(rng, n, 4, spec)
        arr = list(vals)
        sort_readonly(arr, spec)
        assert keys_of(arr, spec) == sorted(keys_of(vals, spec))
        assert Counter(arr) == Counter(vals)


def test_sort_readonly_rejects_wide_universe():
    spec = KeySpec(word_bits=32, key_bits=16)
    arr = [0] * 1000
    with pytest.raises(UnsupportedRegimeError):
        sort_readonly(arr, spec)


def test_sort_readonly_random_regimes():
    rng = random.Random(11)
    for trial in range(40):
        n = rng.randint(200, 20000)
        key_bits = rng.randint(1, max(1, (n.bit_length() - 1) // 2))
        spec = KeySpec(word_bits=32, key_bits=key_bits)
        vals = make_vals(rng, n, key_bits, spec)
        arr = list(vals)
        sort_readonly(arr, spec)
        assert keys_of(arr, spec) == sorted(keys_of(vals, spec)), f"trial {trial}"
        assert Counter(arr) == Counter(vals), f"trial {trial}"


def test_sort_readonly_sorted_and_adversarial_shapes():
    spec = KeySpec(word_bits=32, key_bits=6)
    rng = random.Random(12)
    n = 8192
    shapes = {
        "sorted": sorted(rng.randrange(64) for _ in range(n)),
        "reverse": sorted((rng.randrange(64) for _ in range(n)), reverse=True),
        "two_alternating": [5 if i % 2 else 9 for i in range(n)],
        "mostly_one": [7] * (n - 50) + [rng.randrange(64) for _ in range(50)],
    }
    for name, keys in shapes.items():
        vals = [pack(k, i & spec.payload_mask, spec) for i, k in enumerate(keys)]
        arr = list(vals)
        sort_readonly(arr, spec)
        assert keys_of(arr, spec) == sorted(keys), name
        assert Counter(arr) == Counter(vals), name


def test_sort_readonly_exchange_only_discipline():
    spec = KeySpec(word_bits=32, key_bits=5)
    rng = random.Random(13)
    vals = make_vals(rng, 3000, 5, spec)
    arr = ExchangeOnlyList(vals)
    sort_readonly(arr, spec)
    assert arr.violations == 0
    assert Counter(arr) == Counter(vals)
    assert keys_of(arr, spec) == sorted(keys_of(vals, spec))


def test_sort_readonly_exchange_count_linear_proxy():
    spec = KeySpec(word_bits=32, key_bits=6)
    rng = random.Random(14)
    for n in (4096, 16384):
        vals = make_vals(rng, n, 6, spec)
        arr = list(vals)
        stats = ReadonlyStats()
        sort_readonly(arr, spec, stats=stats)
        assert stats.exchanges <= 48 * n


def test_sort_readonly_probe_constant_and_clean():
    spec = KeySpec(word_bits=32, key_bits=5)
    peaks = set()
    for n in (1 << 12, 1 << 14):
        rng = random.Random(n)
        arr = make_vals(rng, n, 5, spec)
        probe = AllocationProbe()
        sort_readonly(arr, spec, probe=probe)
        assert probe.live_words == 0
        peaks.add(probe.peak_words)
    assert peaks == {READONLY_WORKSPACE_WORDS}
