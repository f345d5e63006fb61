import csv
import io
import random

import pytest

from flatsort.bench_cli import (
    CSV_HEADER,
    BenchConfig,
    ExchangeOnlyList,
    generate_dataset,
    main,
    run_benchmark,
    verify,
)
from flatsort.word_model import KeySpec, pack

SPEC = KeySpec(word_bits=32, key_bits=12)


def test_generate_sorted_keys_nondecreasing():
    data = generate_dataset("sorted", 5, SPEC, seed=3)
    keys = [SPEC.key_of(x) for x in data]
    assert keys == sorted(keys)


def test_generate_few_distinct_alphabet():
    data = generate_dataset("few_distinct", 500, SPEC, seed=3)
    assert len({SPEC.key_of(x) for x in data}) <= 4


def test_generate_deterministic():
    a = generate_dataset("uniform", 1000, SPEC, seed=7)
    b = generate_dataset("uniform", 1000, SPEC, seed=7)
    assert a == b
    c = generate_dataset("uniform", 1000, SPEC, seed=8)
    assert a != c


def test_generate_payloads_enumerate_positions():
    data = generate_dataset("uniform", 100, SPEC, seed=1)
    assert [SPEC.payload_of(x) for x in data] == list(range(100))


def test_verify_flags_good_output():
    rng = random.Random(5)
    snap = [pack(rng.randrange(16), i & 0xFF, KeySpec(16, 8)) for i in range(200)]
    spec = KeySpec(16, 8)
    good = [r for _, r in sorted(enumerate(snap), key=lambda t: (spec.key_of(t[1]), t[0]))]
    v = verify(good, snap, spec, "stable")
    assert v.sorted and v.stable and v.multiset


def test_verify_detects_planted_stability_violation():
    spec = KeySpec(16, 8)
    snap = [pack(7, 1, spec), pack(7, 2, spec), pack(9, 3, spec)]
    out = [pack(7, 2, spec), pack(7, 1, spec), pack(9, 3, spec)]
    v = verify(out, snap, spec, "stable")
    assert v.sorted and v.multiset and v.stable is False


def test_verify_detects_missing_element():
    spec = KeySpec(16, 8)
    snap = [pack(1, 0, spec), pack(2, 1, spec), pack(3, 2, spec)]
    out = [pack(1, 0, spec), pack(2, 1, spec), pack(2, 1, spec)]
    v = verify(out, snap, spec, "unstable")
    assert v.multiset is False


def test_exchange_wrapper_flags_invented_values():
    wrapped = ExchangeOnlyList([10, 20, 30])
    a = wrapped[0]
    b = wrapped[1]
    wrapped[0], wrapped[1] = b, a
    assert wrapped.violations == 0
    wrapped[2] = 12345
    assert wrapped.violations == 1


def test_run_benchmark_row_counts_and_schema():
    config = BenchConfig(algos=["stable"], sizes=[64, 256], reps=5, dist="uniform")
    result = run_benchmark(config)
    assert result.all_verified
    rows = [r for r in result.records]
    assert len(rows) == 2 * (5 + 1)
    medians = [r for r in rows if r.rep == "median"]
    assert len(medians) == 2
    assert all(r.verified_sorted and r.verified_stable for r in rows)


def test_run_benchmark_all_algos_enumeration():
    config = BenchConfig(
        algos=[
            "stable",
            "unstable",
            "readonly",
            "reducer",
            "baseline_radix",
            "baseline_std",
        ],
        sizes=[1 << 14],
        key_bits=6,
        payload_bits=26,
        reps=1,
    )
    result = run_benchmark(config)
    assert result.all_verified
    seen = {r.algo for r in result.records}
    assert seen == set(config.algos)
    base = [r for r in result.records if r.algo == "baseline_radix"][0]
    assert base.peak_aux_words >= 1 << 14
    for r in result.records:
        if r.algo in ("stable", "unstable", "readonly", "reducer"):
            assert r.peak_aux_words <= 256


def test_run_benchmark_small_stable_verified():
    config = BenchConfig(algos=["stable"], sizes=[10], reps=1)
    result = run_benchmark(config)
    assert all(
        r.verified_sorted and r.verified_stable and r.verified_multiset
        for r in result.records
    )


def test_cli_csv_output_schema_and_exit_code(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code = main(
        [
            "--algo",
            "stable",
            "--n",
            "128",
            "--n",
            "512",
            "--reps",
            "2",
            "--csv",
            str(out),
        ]
    )
    assert code == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 1 + 2 * 3
    assert all(len(row) == len(CSV_HEADER) for row in rows)


def test_cli_stdout_and_readonly_skip_note(capsys):
    code = main(["--algo", "readonly", "--n", "100", "--key-bits", "12", "--reps", "1"])
    captured = capsys.readouterr()
    assert code == 0
    assert "skipped" in captured.err
    assert captured.out.startswith(",".join(CSV_HEADER[:3]))


def test_cli_unknown_algo_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["--algo", "bogosort"])
    assert exc.value.code == 2


def test_cli_bad_widths_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["--key-bits", "40", "--payload-bits", "40"])
    assert exc.value.code == 2
