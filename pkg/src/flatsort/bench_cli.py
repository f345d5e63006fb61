"""Benchmark harness: dataset generation, timing, verification, memory.

Each run sorts generated datasets with one or more algorithms and emits
one CSV row per repetition plus a median row per (algo, n, dist) combo.
Verification always goes through independent oracles (the platform sort
and plain scans), never through the library's own machinery.  Timing
and memory are separate passes so the probe never distorts wall time.

The schema is fixed:

    algo,n,key_bits,payload_bits,dist,seed,rep,wall_nanos,peak_aux_words,
    sorted,stable,multiset,baseline_ratio
"""

from __future__ import annotations

import argparse
import csv
import random
import statistics
import sys
import time
from collections import Counter
from dataclasses import dataclass, field

from .errors import FlatsortError, UnsupportedRegimeError
from .inplace_sort import sort_stable, sort_unstable
from .readonly_sort import sort_readonly
from .space_reducer import lsd_radix_box, reduce_space
from .word_model import AllocationProbe, KeySpec

CSV_HEADER = [
    "algo",
    "n",
    "key_bits",
    "payload_bits",
    "dist",
    "seed",
    "rep",
    "wall_nanos",
    "peak_aux_words",
    "sorted",
    "stable",
    "multiset",
    "baseline_ratio",
]

DISTRIBUTIONS = ("uniform", "few_distinct", "sorted", "reverse", "runs")
ALGOS = ("stable", "unstable", "readonly", "reducer", "baseline_radix", "baseline_std")
_STABLE_ALGOS = {"stable", "reducer", "baseline_radix"}


@dataclass
class BenchRecord:
    """One benchmark row; verdicts come from oracles, never the sorter."""

    algo: str
    n: int
    key_bits: int
    payload_bits: int
    dist: str
    seed: int
    rep: str
    wall_nanos: int
    peak_aux_words: int
    verified_sorted: bool | None
    verified_stable: bool | None
    verified_multiset: bool | None
    baseline_ratio: float | None

    def row(self) -> list[str]:
        def tri(v):
            return "na" if v is None else ("true" if v else "false")

        return [
            self.algo,
            str(self.n),
            str(self.key_bits),
            str(self.payload_bits),
            self.dist,
            str(self.seed),
            str(self.rep),
            str(self.wall_nanos),
            str(self.peak_aux_words),
            tri(self.verified_sorted),
            tri(self.verified_stable),
            tri(self.verified_multiset),
            "" if self.baseline_ratio is None else f"{self.baseline_ratio:.3f}",
        ]


@dataclass
class Verdicts:
    sorted: bool
    stable: bool | None
    multiset: bool
    exchange_ok: bool | None = None


class ExchangeOnlyList(list):
    """Write-intercepting array for the read-only discipline check:
    every stored word must have been loaded from the array before."""

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


def generate_dataset(dist: str, n: int, spec: KeySpec, seed: int) -> list[int]:
    """Deterministic dataset; payloads enumerate original positions
    (truncated to the payload width) so stability stays checkable."""
    if dist not in DISTRIBUTIONS:
        raise FlatsortError(f"unknown distribution {dist}")
    if n * spec.word_bits > 1 << 34:
        raise FlatsortError(f"{n} words of {spec.word_bits} bits exceed the bench budget")
    rng = random.Random((seed, dist, n, spec.key_bits, spec.word_bits).__hash__())
    universe = spec.key_universe
    if dist == "uniform":
        keys = [rng.randrange(universe) for _ in range(n)]
    elif dist == "few_distinct":
        alphabet = [rng.randrange(universe) for _ in range(min(4, universe))]
        keys = [rng.choice(alphabet) for _ in range(n)]
    elif dist == "sorted":
        keys = sorted(rng.randrange(universe) for _ in range(n))
    elif dist == "reverse":
        keys = sorted((rng.randrange(universe) for _ in range(n)), reverse=True)
    else:  # runs
        keys = []
        while len(keys) < n:
            keys.extend([rng.randrange(universe)] * rng.randint(1, 64))
        del keys[n:]
    pb = spec.payload_bits
    pmask = spec.payload_mask
    return [(k << pb) | (i & pmask) for i, k in enumerate(keys)]


def verify(
    output: list[int],
    input_snapshot: list[int],
    spec: KeySpec,
    mode: str,
) -> Verdicts:
    """Oracle checks: sortedness, raw multiset equality and, for
    mode="stable", per-key payload order against the input scan."""
    pb = spec.payload_bits
    is_sorted = all(
        output[i] >> pb <= output[i + 1] >> pb for i in range(len(output) - 1)
    )
    multiset = Counter(output) == Counter(input_snapshot)
    stable: bool | None = None
    if mode == "stable":
        expected = [
            raw
            for _, raw in sorted(
                enumerate(input_snapshot), key=lambda t: (t[1] >> pb, t[0])
            )
        ]
        if len(output) == len(expected):
            stable = True
            per_key: dict[int, list[int]] = {}
            for raw in input_snapshot:
                per_key.setdefault(raw >> pb, []).append(raw & spec.payload_mask)
            cursors: dict[int, int] = {}
            for raw in output:
                k = raw >> pb
                want = per_key.get(k)
                c = cursors.get(k, 0)
                if want is None or c >= len(want) or want[c] != (raw & spec.payload_mask):
                    stable = False
                    break
                cursors[k] = c + 1
        else:
            stable = False
    return Verdicts(sorted=is_sorted, stable=stable, multiset=multiset)


def _baseline_radix(arr: list[int], spec: KeySpec, probe: AllocationProbe | None):
    """The comparison point: LSD radix with freely allocated scratch."""
    n = len(arr)
    digit = min(spec.key_bits, 12)
    radix = 1 << digit
    if probe is not None:
        probe.acquire(n + radix)
    try:
        dst = [0] * n
        src = arr
        passes = -(-spec.key_bits // digit)
        mask = radix - 1
        for p in range(passes):
            shift = spec.payload_bits + p * digit
            counts = [0] * radix
            for x in src:
                counts[(x >> shift) & mask] += 1
            total = 0
            for dgt in range(radix):
                c = counts[dgt]
                counts[dgt] = total
                total += c
            for x in src:
                dgt = (x >> shift) & mask
                dst[counts[dgt]] = x
                counts[dgt] += 1
            src, dst = dst, src
        if src is not arr:
            arr[:] = src
    finally:
        if probe is not None:
            probe.release(n + radix)


def _dispatch(algo: str, arr, spec, probe):
    if algo == "stable":
        sort_stable(arr, spec, probe)
    elif algo == "unstable":
        sort_unstable(arr, spec, probe)
    elif algo == "readonly":
        sort_readonly(arr, spec, probe)
    elif algo == "reducer":
        reduce_space(arr, spec, lsd_radix_box, probe)
    elif algo == "baseline_radix":
        _baseline_radix(arr, spec, probe)
    elif algo == "baseline_std":
        arr.sort()  # raw order refines key order
    else:
        raise FlatsortError(f"unknown algorithm {algo}")


@dataclass
class BenchConfig:
    algos: list[str]
    sizes: list[int]
    key_bits: int = 12
    payload_bits: int = 20
    dist: str = "uniform"
    seed: int = 1
    reps: int = 3
    verify: bool = True


@dataclass
class BenchResult:
    records: list[BenchRecord] = field(default_factory=list)
    all_verified: bool = True
    skipped: list[str] = field(default_factory=list)


def run_benchmark(config: BenchConfig) -> BenchResult:
    spec = KeySpec(
        word_bits=config.key_bits + config.payload_bits, key_bits=config.key_bits
    )
    result = BenchResult()
    baseline_medians: dict[tuple[int, str], float] = {}
    ordered = sorted(config.algos, key=lambda a: a != "baseline_radix")
    for algo in ordered:
        for n in config.sizes:
            if algo == "readonly" and spec.key_universe**2 > max(n, 4096):
                result.skipped.append(
                    f"{algo} n={n}: key universe {spec.key_universe} too large"
                )
                continue
            data = generate_dataset(config.dist, n, spec, config.seed)

            walls = []
            for rep in range(config.reps):
                work = list(data)
                t0 = time.perf_counter_ns()
                _dispatch(algo, work, spec, None)
                walls.append(time.perf_counter_ns() - t0)

            probe = AllocationProbe()
            work = list(data)
            _dispatch(algo, work, spec, probe)
            peak = probe.peak_words

            verdicts = None
            if config.verify:
                mode = "stable" if algo in _STABLE_ALGOS else "unstable"
                if algo == "readonly":
                    wrapped = ExchangeOnlyList(data)
                    sort_readonly(wrapped, spec)
                    verdicts = verify(list(wrapped), data, spec, mode)
                    verdicts.exchange_ok = wrapped.violations == 0
                    if not verdicts.exchange_ok:
                        result.all_verified = False
                else:
                    verdicts = verify(work, data, spec, mode)
                for flag in (verdicts.sorted, verdicts.stable, verdicts.multiset):
                    if flag is False:
                        result.all_verified = False

            median = statistics.median(walls)
            if algo == "baseline_radix":
                baseline_medians[(n, config.dist)] = median
            ratio = None
            base = baseline_medians.get((n, config.dist))
            if base and algo != "baseline_radix":
                ratio = median / base

            def record(rep_label, wall, with_ratio):
                result.records.append(
                    BenchRecord(
                        algo=algo,
                        n=n,
                        key_bits=spec.key_bits,
                        payload_bits=spec.payload_bits,
                        dist=config.dist,
                        seed=config.seed,
                        rep=rep_label,
                        wall_nanos=int(wall),
                        peak_aux_words=peak,
                        verified_sorted=verdicts.sorted if verdicts else None,
                        verified_stable=verdicts.stable if verdicts else None,
                        verified_multiset=verdicts.multiset if verdicts else None,
                        baseline_ratio=with_ratio,
                    )
                )

            for rep, wall in enumerate(walls):
                record(str(rep), wall, None)
            record("median", median, ratio)
    return result


def write_csv(records: list[BenchRecord], out) -> None:
    writer = csv.writer(out)
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(rec.row())


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="flatsort-bench",
        description="Benchmark the constant-space sorters against scratch baselines.",
    )
    parser.add_argument("--algo", choices=ALGOS + ("all",), default="all")
    parser.add_argument(
        "--n", type=int, action="append", help="array length; repeatable"
    )
    parser.add_argument("--key-bits", type=int, default=12)
    parser.add_argument("--payload-bits", type=int, default=20)
    parser.add_argument("--dist", choices=DISTRIBUTIONS, default="uniform")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--csv", default="-", help="output path or - for stdout")
    parser.add_argument("--verify", choices=("on", "off"), default="on")
    args = parser.parse_args(argv)

    if args.reps < 1 or args.key_bits < 1 or args.payload_bits < 0:
        parser.error("reps must be >= 1 and field widths positive")
    if args.key_bits + args.payload_bits > 64:
        parser.error("key and payload widths exceed 64 bits")

    algos = list(ALGOS) if args.algo == "all" else [args.algo]
    config = BenchConfig(
        algos=algos,
        sizes=args.n or [1 << 16],
        key_bits=args.key_bits,
        payload_bits=args.payload_bits,
        dist=args.dist,
        seed=args.seed,
        reps=args.reps,
        verify=args.verify == "on",
    )
    try:
        result = run_benchmark(config)
    except UnsupportedRegimeError as exc:
        parser.error(str(exc))  # exits 2
    for note in result.skipped:
        print(f"skipped: {note}", file=sys.stderr)
    if args.csv == "-":
        write_csv(result.records, sys.stdout)
    else:
        with open(args.csv, "w", newline="") as fh:
            write_csv(result.records, fh)
    if config.verify and not result.all_verified:
        print("verification FAILED", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
