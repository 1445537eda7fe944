"""Scaling benchmark: materialized pairwise oracle vs the compact z-first path.

Wall time is measured on the kernels themselves (the part whose cost
differs between the two strategies): the compiled backend loops inside C
and reads a monotonic clock there, so Python call overhead does not flatten
the small sizes.  Auxiliary memory is measured separately by running the
library entry points under the tagged-allocation tracker.
"""
from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._workspace import track_aux
from .compact import GroupConfig, _core, _lift_weights
from .core import init_params
from .kernels import KernelSpec, taylor_coefficients
from .oracle import FAMILY_CODE, ORACLE_LIMIT, gnl_forward_exact

DEFAULT_GRID = (64, 128, 256, 512, 1024, 2048, 4096)
CGNL_SLOPE = (0.8, 1.3)
ORACLE_SLOPE = (1.7, 2.3)
MEM_DOUBLING = (1.8, 2.2)
MIN_BATCH_NS = 1_000_000
MIN_REPEATS = 5


@dataclass
class BenchRecord:
    method: str
    n: int
    c: int
    p: int
    groups: int
    wall_time_ns: float
    peak_aux_bytes: int
    repeats: int
    backend: str = ""

    CSV_FIELDS = ("method", "n", "c", "p", "groups", "wall_time_ns", "peak_aux_bytes", "repeats")


def _median_ns(run, repeats):
    """Median per-call nanoseconds; ``run(iters)`` returns elapsed ns for ``iters`` calls."""
    iters = 1
    while True:
        elapsed = run(iters)
        if elapsed >= MIN_BATCH_NS or iters >= 1 << 24:
            break
        iters *= 2 if elapsed < 1000 else max(2, int(MIN_BATCH_NS / max(elapsed, 1)) + 1)
    samples = [run(iters) / iters for _ in range(repeats)]
    return statistics.median(samples)


def _inputs(n, c, groups, seed):
    rng = np.random.default_rng(seed)
    m = n * c // groups
    vecs = [np.ascontiguousarray(rng.uniform(-1, 1, size=(groups, m))) for _ in range(3)]
    return vecs, m


def time_cgnl(n, c, spec, groups=1, repeats=MIN_REPEATS, backend=None, seed=0):
    kern = _backend.get(backend)
    (t, f, g), m = _inputs(n, c, groups, seed)
    if spec.normalize_inputs:
        t = t / np.linalg.norm(t, axis=1, keepdims=True)
        f = f / np.linalg.norm(f, axis=1, keepdims=True)
    at, ap = _lift_weights(spec)
    k = at.size
    tl = np.empty((groups, m, k))
    pl = np.empty((groups, m, k))
    z = np.empty((groups, k))
    out = np.empty((groups, m))
    run = lambda iters: kern.time_compact(t, f, g, at, ap, tl, pl, z, out, iters)
    run(1)  # warmup, discarded
    return _median_ns(run, repeats)


def time_oracle(n, c, spec, groups=1, repeats=MIN_REPEATS, backend=None, seed=0):
    kern = _backend.get(backend)
    (t, f, g), m = _inputs(n, c, groups, seed)
    alpha_sq = taylor_coefficients(spec).as_array()
    pair = np.empty((m, m))
    out = np.empty(m)
    code = FAMILY_CODE[spec.family]

    def run(iters):
        total = 0
        for k in range(groups):
            total += kern.time_pairwise(t[k], f[k], g[k], alpha_sq, code, float(spec.gamma),
                                        True, pair, out, iters)
        return total

    run(1)
    return _median_ns(run, repeats)


def measure_aux(n, c, spec, groups=1, seed=0):
    """Peak tagged intermediate bytes of each path on a random feature map."""
    x = np.random.default_rng(seed).uniform(-1, 1, size=(n, c))
    params = init_params(c, seed, "uniform_range")
    with track_aux() as tr:
        _core(x[None], params, spec, groups)
    cgnl_bytes = tr.peak
    with track_aux() as tr:
        gnl_forward_exact(x, params, spec, use_taylor=True, groups=groups)
    return cgnl_bytes, tr.peak


def run_bench(grid=DEFAULT_GRID, c=8, spec=None, groups=1, repeats=MIN_REPEATS,
              backend=None, seed=0, methods=("oracle_gnl", "cgnl"), progress=None):
    spec = spec or KernelSpec("embedded_gaussian", order=3)
    GroupConfig(groups).channels_per_group(c)
    name = _backend.NAME if backend in (None, "auto") else backend
    records = []
    for nc in grid:
        if nc % c:
            raise ValueError(f"NC={nc} is not a multiple of C={c}")
        if nc > ORACLE_LIMIT and "oracle_gnl" in methods:
            raise ValueError(f"NC={nc} exceeds the oracle limit {ORACLE_LIMIT}")
        n = nc // c
        cgnl_bytes, oracle_bytes = measure_aux(n, c, spec, groups, seed)
        for method in methods:
            if method == "cgnl":
                ns = time_cgnl(n, c, spec, groups, repeats, backend, seed)
                aux = cgnl_bytes
            else:
                ns = time_oracle(n, c, spec, groups, repeats, backend, seed)
                aux = oracle_bytes
            rec = BenchRecord(method, n, c, spec.order, groups, ns, aux, repeats, name)
            records.append(rec)
            if progress:
                progress(rec)
    return records


def loglog_slope(records, method):
    pts = sorted((r.n * r.c, r.wall_time_ns) for r in records if r.method == method)
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def check_records(records):
    """Evaluate the scaling assertions; returns ``[(name, ok, detail), ...]``."""
    results = []
    by = {(r.method, r.n * r.c): r for r in records}
    sizes = sorted({r.n * r.c for r in records})
    methods = {r.method for r in records}
    if "cgnl" in methods:
        s = loglog_slope(records, "cgnl")
        results.append(("cgnl time slope", CGNL_SLOPE[0] <= s <= CGNL_SLOPE[1],
                        f"{s:.3f} in {list(CGNL_SLOPE)}"))
        if 1024 in sizes and 2048 in sizes:
            ratio = by["cgnl", 2048].peak_aux_bytes / by["cgnl", 1024].peak_aux_bytes
            results.append(("cgnl aux memory doubling", MEM_DOUBLING[0] <= ratio <= MEM_DOUBLING[1],
                            f"{ratio:.3f} in {list(MEM_DOUBLING)}"))
    if "oracle_gnl" in methods:
        s = loglog_slope(records, "oracle_gnl")
        results.append(("oracle time slope", ORACLE_SLOPE[0] <= s <= ORACLE_SLOPE[1],
                        f"{s:.3f} in {list(ORACLE_SLOPE)}"))
        if 4096 in sizes:
            r = by["oracle_gnl", 4096]
            expected = 4096 ** 2 * 8 // r.groups
            ratio = r.peak_aux_bytes / expected
            results.append(("oracle pairwise buffer size", abs(ratio - 1) <= 0.10,
                            f"{r.peak_aux_bytes} B vs {expected} B ({ratio:.4f}x)"))
    return results


def to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BenchRecord.CSV_FIELDS)
    for r in records:
        w.writerow([r.method, r.n, r.c, r.p, r.groups, f"{r.wall_time_ns:.1f}",
                    r.peak_aux_bytes, r.repeats])
    return buf.getvalue()


def format_table(records) -> str:
    lines = [f"{'method':<11} {'NC':>6} {'N':>5} {'C':>3} {'P':>2} {'G':>2} "
             f"{'median time':>12} {'aux bytes':>12}"]
    for r in records:
        lines.append(f"{r.method:<11} {r.n * r.c:>6} {r.n:>5} {r.c:>3} {r.p:>2} {r.groups:>2} "
                     f"{format_ns(r.wall_time_ns):>12} {r.peak_aux_bytes:>12}")
    return "\n".join(lines)


def format_ns(ns):
    if ns >= 1e6:
        return f"{ns / 1e6:.2f} ms"
    if ns >= 1e3:
        return f"{ns / 1e3:.2f} us"
    return f"{ns:.0f} ns"


def compare_backends(grid=DEFAULT_GRID, c=8, spec=None, groups=1, repeats=MIN_REPEATS, seed=0):
    """Time both kernel backends on the same grid; returns rows of per-size timings."""
    if _backend.compiled is None:
        raise RuntimeError("compiled kernels are not available in this build")
    spec = spec or KernelSpec("embedded_gaussian", order=3)
    rows = []
    for nc in grid:
        n = nc // c
        row = {"nc": nc}
        for b in ("compiled", "python"):
            row[f"cgnl_{b}"] = time_cgnl(n, c, spec, groups, repeats, b, seed)
            row[f"oracle_{b}"] = time_oracle(n, c, spec, groups, repeats, b, seed)
        rows.append(row)
    return rows
