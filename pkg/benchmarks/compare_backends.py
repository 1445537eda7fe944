"""Compiled vs numpy kernel timings on the benchmark grid.

    python benchmarks/compare_backends.py [--c 8] [--order 3] [--csv out.csv]
"""
import argparse
import csv
import sys

from cgnl import _backend
from cgnl.bench import DEFAULT_GRID, compare_backends, format_ns
from cgnl.kernels import KernelSpec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", type=int, default=8)
    ap.add_argument("--order", type=int, default=3)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args(argv)
    if _backend.compiled is None:
        print("compiled kernels not built; nothing to compare", file=sys.stderr)
        return 2
    spec = KernelSpec("embedded_gaussian", order=args.order)
    rows = compare_backends(DEFAULT_GRID, args.c, spec, repeats=args.repeats)
    print(f"{'NC':>6} {'cgnl C':>10} {'cgnl numpy':>11} {'speedup':>8} "
          f"{'oracle C':>10} {'oracle numpy':>13} {'speedup':>8}")
    for r in rows:
        print(f"{r['nc']:>6} {format_ns(r['cgnl_compiled']):>10} {format_ns(r['cgnl_python']):>11} "
              f"{r['cgnl_python'] / r['cgnl_compiled']:>7.1f}x "
              f"{format_ns(r['oracle_compiled']):>10} {format_ns(r['oracle_python']):>13} "
              f"{r['oracle_python'] / r['oracle_compiled']:>7.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
