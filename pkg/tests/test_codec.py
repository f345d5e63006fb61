import random

import pytest

from flatsort.codec import (
    CODEC_WORKSPACE_WORDS,
    compress_sorted,
    decompress_sorted,
    freed_capacity,
)
from flatsort.errors import ContractViolationError, UnsupportedSizeError
from flatsort.word_model import AllocationProbe, KeySpec

W8 = KeySpec(word_bits=8, key_bits=8)


def test_compress_ramp_hand_simulated():
    # raw 0..11 over 8-bit words: hi_bits=2, four ones and no zeros in the
    # stream, boundary 13 (no MSB set anywhere), 8 freed bits.
    arr = list(range(12))
    state = compress_sorted(arr, 0, 12, W8)
    assert state.msb_boundary == 13
    assert state.hi_bits == 2
    assert state.ones == 4
    assert state.zeros == 0
    assert state.freed_bits == 8
    # Stream "1111" lands in the MSBs of the first four words; the low
    # 6-bit slices of 8,9,10,11 pack into three bytes; the last byte is
    # freed and zero.  Derived by hand from the layout rules.
    assert arr == [128, 129, 130, 131, 4, 5, 6, 7, 0x20, 0x92, 0x8B, 0]
    assert state.scratch_slots(0, 8) == (11, 1)
    decompress_sorted(arr, 0, state, W8)
    assert arr == list(range(12))


def test_compress_all_equal_hand_simulated():
    # Twelve copies of 0x80: boundary 1, stream "001111" (hi=2 then three
    # zero deltas), 8 freed bits.
    arr = [0x80] * 12
    state = compress_sorted(arr, 0, 12, W8)
    assert state.msb_boundary == 1
    assert state.ones == 4
    assert state.zeros == 2
    assert state.freed_bits == 8
    assert arr == [0, 0, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0, 0, 0, 0]
    decompress_sorted(arr, 0, state, W8)
    assert arr == [0x80] * 12


def test_freed_capacity_formula():
    assert freed_capacity(12, W8) == 8
    assert freed_capacity(96, KeySpec(16, 16)) == 160
    assert freed_capacity(3 * 2**10, KeySpec(32, 32)) == 2**10 * 10
    with pytest.raises(UnsupportedSizeError):
        freed_capacity(11, W8)


def test_region_too_small():
    with pytest.raises(UnsupportedSizeError):
        compress_sorted([0] * 11, 0, 11, W8)


def test_unsorted_region_rejected():
    arr = sorted(random.Random(5).randrange(256) for _ in range(20))
    arr[7], arr[8] = max(arr[7], arr[8]) + 1, 0
    arr[7] &= 0xFF
    with pytest.raises(ContractViolationError):
        compress_sorted(arr, 0, 20, W8)


def test_roundtrip_random_sorted_regions():
    rng = random.Random(99)
    for trial in range(300):
        w = rng.choice([8, 16, 32, 64])
        spec = KeySpec(word_bits=w, key_bits=w)
        n = rng.randint(12, 4096)
        arr = sorted(rng.randrange(1 << w) for _ in range(n))
        snapshot = list(arr)
        state = compress_sorted(arr, 0, n, spec)
        decompress_sorted(arr, 0, state, spec)
        assert arr == snapshot, f"trial {trial} (w={w}, n={n})"


def test_roundtrip_with_offset_and_surroundings_untouched():
    rng = random.Random(3)
    spec = KeySpec(word_bits=16, key_bits=16)
    pad = [rng.randrange(1 << 16) for _ in range(7)]
    body = sorted(rng.randrange(1 << 16) for _ in range(200))
    arr = pad + body + pad
    state = compress_sorted(arr, 7, 200, spec)
    assert arr[:7] == pad and arr[-7:] == pad
    decompress_sorted(arr, 7, state, spec)
    assert arr == pad + body + pad


def test_roundtrip_survives_dirty_freed_region():
    rng = random.Random(17)
    spec = KeySpec(word_bits=32, key_bits=32)
    for _ in range(50):
        n = rng.randint(12, 600)
        arr = sorted(rng.randrange(1 << 32) for _ in range(n))
        snapshot = list(arr)
        state = compress_sorted(arr, 0, n, spec)
        first, count = state.scratch_slots(0, 32)
        for i in range(first, first + count):
            arr[i] = rng.randrange(1 << 32)
        decompress_sorted(arr, 0, state, spec)
        assert arr == snapshot


def test_scratch_slots_are_zero_after_compression():
    rng = random.Random(23)
    spec = KeySpec(word_bits=32, key_bits=32)
    for _ in range(30):
        n = rng.randint(12, 500)
        arr = sorted(rng.randrange(1 << 32) for _ in range(n))
        state = compress_sorted(arr, 0, n, spec)
        first, count = state.scratch_slots(0, 32)
        assert count * 32 >= state.freed_bits - 31
        assert all(arr[i] == 0 for i in range(first, first + count))


def test_stream_shape_counts():
    rng = random.Random(31)
    spec = KeySpec(word_bits=32, key_bits=32)
    for _ in range(50):
        n = rng.randint(12, 2000)
        arr = sorted(rng.randrange(1 << 32) for _ in range(n))
        state = compress_sorted(arr, 0, n, spec)
        assert state.ones == n - (2 * n) // 3  # ceil(n/3)
        assert state.zeros <= n // 3
        assert state.ones + state.zeros <= (2 * n) // 3


def test_narrow_key_field_requires_explicit_hi_bits():
    spec = KeySpec(word_bits=32, key_bits=3)
    rng = random.Random(41)
    keys = sorted(rng.randrange(8) for _ in range(300))
    arr = [(k << 29) | rng.randrange(1 << 29) for k in keys]
    with pytest.raises(ContractViolationError):
        compress_sorted(arr, 0, 300, spec)
    snapshot = list(arr)
    state = compress_sorted(arr, 0, 300, spec, hi_bits=3)
    assert state.freed_bits == 100 * 3
    decompress_sorted(arr, 0, state, spec)
    assert arr == snapshot


def test_key_sorted_payload_disorder_roundtrips():
    # Stability carriers: equal keys keep arbitrary payload order, and the
    # codec must restore that exact order.
    spec = KeySpec(word_bits=16, key_bits=6)
    rng = random.Random(57)
    for _ in range(50):
        n = rng.randint(12, 400)
        keys = sorted(rng.randrange(64) for _ in range(n))
        arr = [(k << 10) | rng.randrange(1 << 10) for k in keys]
        snapshot = list(arr)
        hi = min(spec.key_bits, (n // 3).bit_length() - 1)
        state = compress_sorted(arr, 0, n, spec, hi_bits=hi)
        decompress_sorted(arr, 0, state, spec)
        assert arr == snapshot


def test_codec_is_allocation_free_under_probe():
    probe = AllocationProbe()
    spec = KeySpec(word_bits=32, key_bits=32)
    arr = sorted(random.Random(1).randrange(1 << 32) for _ in range(500))
    state = compress_sorted(arr, 0, 500, spec, probe=probe)
    decompress_sorted(arr, 0, state, spec, probe=probe)
    assert probe.peak_words == CODEC_WORKSPACE_WORDS
    assert probe.live_words == 0
