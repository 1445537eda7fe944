import numpy as np
import pytest

from cgnl import bench
from cgnl.bench import BenchRecord, check_records, loglog_slope, measure_aux, run_bench, to_csv
from cgnl.kernels import KernelSpec


def _fake(method, exponent, mem_exponent=1.0):
    return [BenchRecord(method, nc // 8, 8, 3, 1, 10.0 * nc ** exponent,
                        int(8 * nc ** mem_exponent), 5) for nc in bench.DEFAULT_GRID]


def test_csv_schema():
    text = to_csv([BenchRecord("cgnl", 8, 8, 3, 1, 1234.5, 100, 5)])
    lines = text.splitlines()
    assert lines[0] == "method,n,c,p,groups,wall_time_ns,peak_aux_bytes,repeats"
    assert lines[1] == "cgnl,8,8,3,1,1234.5,100,5"


def test_slope_fit_recovers_exponent():
    assert loglog_slope(_fake("cgnl", 1.0), "cgnl") == pytest.approx(1.0)
    assert loglog_slope(_fake("oracle_gnl", 2.0), "oracle_gnl") == pytest.approx(2.0)


def test_check_records_flags_wrong_scaling():
    good = _fake("cgnl", 1.0) + [BenchRecord(r.method, r.n, r.c, r.p, r.groups, r.wall_time_ns,
                                             4096 ** 2 * 8 if r.n * r.c == 4096 else 0, 5)
                                 for r in _fake("oracle_gnl", 2.0)]
    assert all(ok for _, ok, _ in check_records(good))
    bad = _fake("cgnl", 2.0)
    assert not all(ok for _, ok, _ in check_records(bad))


def test_measure_aux_exact_sizes():
    spec = KernelSpec("embedded_gaussian", order=3)
    cgnl_bytes, oracle_bytes = measure_aux(32, 8, spec)
    nc = 256
    assert cgnl_bytes == (2 * nc * 4 + 4) * 8
    assert oracle_bytes == nc * nc * 8
    c2, o2 = measure_aux(16, 8, spec, groups=2)
    assert o2 == (64 * 64) * 8


def test_small_grid_run():
    spec = KernelSpec("embedded_gaussian", order=2)
    records = run_bench((64, 128, 256), 8, spec, repeats=5)
    assert [r.method for r in records] == ["oracle_gnl", "cgnl"] * 3
    assert all(r.wall_time_ns > 0 and r.repeats == 5 for r in records)
    assert all(r.p == 2 for r in records)


def test_grid_validation():
    with pytest.raises(ValueError):
        run_bench((60,), 8)
    with pytest.raises(ValueError):
        run_bench((8192,), 8)


def test_median_increases_iterations_for_fast_calls():
    calls = []

    def run(iters):
        calls.append(iters)
        return 10 * iters  # 10 ns per call: far below timer resolution
    assert bench._median_ns(run, 5) == 10
    assert max(calls) * 10 >= bench.MIN_BATCH_NS
    assert len(calls) >= 5


def test_format_ns():
    assert bench.format_ns(512) == "512 ns"
    assert bench.format_ns(2500) == "2.50 us"
    assert bench.format_ns(3.2e6) == "3.20 ms"
