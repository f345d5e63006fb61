"""In-place integer sorting with a constant number of auxiliary words.

The package provides three sorters over arrays of packed (key, payload)
words plus a generic space-reduction wrapper:

* ``sort_stable``    - stable, linear-time in the radix regime, O(1) words.
* ``sort_unstable``  - unstable variant built on cycle-leader counting.
* ``sort_readonly``  - unstable, never writes key bits (exchanges only).
* ``reduce_space``   - wraps any scratch-hungry sorter into an O(1)-word one.

All of them create scratch space by compressing an already-sorted run
of the array and lending out the freed bits, instead of allocating.
"""

from .word_model import AllocationProbe, Element, KeySpec, pack, rank_of, unpack
from .codec import CodecState, compress_sorted, decompress_sorted, freed_capacity
from .block_merge import MergePlan, kway_block_merge, permute_blocks
from .radix_core import (
    CounterBank,
    bubble_sort_stable,
    counting_pass_stable,
    cycle_leader_sort,
    heapsort_unstable,
    radix_sort_chunk,
)
from .inplace_sort import RecursionSchedule, build_schedule, sort_stable, sort_unstable
from .readonly_sort import (
    BitMemory,
    ExchangeMemory,
    PointerPools,
    ReadonlyStats,
    sort_readonly,
)
from .space_reducer import (
    BlackBoxSorter,
    counting_sort_box,
    heap_multiway_merge,
    lsd_radix_box,
    reduce_space,
)

__all__ = [
    "AllocationProbe",
    "BitMemory",
    "BlackBoxSorter",
    "CodecState",
    "CounterBank",
    "Element",
    "ExchangeMemory",
    "KeySpec",
    "MergePlan",
    "PointerPools",
    "ReadonlyStats",
    "RecursionSchedule",
    "bubble_sort_stable",
    "build_schedule",
    "compress_sorted",
    "counting_pass_stable",
    "counting_sort_box",
    "cycle_leader_sort",
    "decompress_sorted",
    "freed_capacity",
    "heap_multiway_merge",
    "heapsort_unstable",
    "kway_block_merge",
    "lsd_radix_box",
    "pack",
    "permute_blocks",
    "radix_sort_chunk",
    "rank_of",
    "reduce_space",
    "sort_readonly",
    "sort_stable",
    "sort_unstable",
    "unpack",
]
