"""``cgnl`` command line: verify, bench, train-toy, affinity.

Exit status is 0 on success, 1 when a property or assertion fails and 2 on
usage or I/O errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import _backend
from .errors import CgnlError, ConfigError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _kernel_args(p, default="egauss"):
    p.add_argument("--kernel", choices=("dot", "egauss", "rbf"), default=default)
    p.add_argument("--order", type=int, default=None,
                   help="Taylor order P (default 1 for dot, 3 otherwise)")
    p.add_argument("--gamma", type=float, default=1e-4, help="rbf bandwidth")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                   help="l2-normalize theta/phi per group (always on for rbf)")
    p.add_argument("--groups", type=int, default=1)


def _spec(args):
    from .kernels import parse_kernel
    return parse_kernel(args.kernel, args.order, args.gamma, args.normalize)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgnl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version="%(prog)s 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", nargs="+", metavar="PROPERTY", help="run only these properties")
    p.add_argument("--list", action="store_true", help="list property names and exit")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("bench", help="time the pairwise oracle against the compact path")
    p.add_argument("--c", type=int, default=8)
    _kernel_args(p)
    p.add_argument("--grid", type=int, nargs="+", default=None, metavar="NC",
                   help="NC sizes (default 64 .. 4096, doubling)")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", choices=("auto", "compiled", "python"), default="auto")
    p.add_argument("--out", type=Path, default=None, help="CSV output path")
    p.add_argument("--no-check", action="store_true", help="skip the slope assertions")
    p.add_argument("--compare", action="store_true",
                   help="time both kernel backends instead of the scaling run")

    p = sub.add_parser("train-toy", help="train the toy classifier and write the loss curve")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--c", type=int, default=8)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--shift", type=int, default=0, help="position offset in the label rule")
    p.add_argument("--seed", type=int, default=0)
    _kernel_args(p, default="dot")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, default=None, help="loss CSV path (default stdout)")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("affinity", help="export affinity masks for a reference position")
    p.add_argument("input", type=Path, help="feature map (.bin or .csv)")
    p.add_argument("--ref", type=int, default=0, help="reference position")
    p.add_argument("--ref-channel", type=int, default=0)
    _kernel_args(p, default="dot")
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0, help="seed for random block weights")
    p.add_argument("--params", type=Path, default=None, help=".npz with block weights")
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--frames", type=int, default=1)
    p.add_argument("--positions-only", action="store_true",
                   help="plain dot-product position affinity (one mask)")
    p.add_argument("--out", type=Path, default=Path("affinity"), help="output stem")
    return parser


def cmd_verify(args) -> int:
    from .compact import inject_coefficient_fault
    from .verify import PROPERTIES, format_report, run_all

    names = [n for n, _ in PROPERTIES]
    if args.list:
        print("\n".join(names))
        return EXIT_OK
    if args.only:
        unknown = sorted(set(args.only) - set(names))
        if unknown:
            raise UsageError(f"unknown properties: {', '.join(unknown)}")
    print(f"backend: {_backend.NAME}")
    if args.inject_fault:
        with inject_coefficient_fault():
            results = run_all(args.seed, args.only)
    else:
        results = run_all(args.seed, args.only)
    print(format_report(results))
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL


def cmd_bench(args) -> int:
    from . import bench

    spec = _spec(args)
    grid = tuple(args.grid) if args.grid else bench.DEFAULT_GRID
    if args.repeats < bench.MIN_REPEATS:
        raise UsageError(f"--repeats must be at least {bench.MIN_REPEATS}")
    if args.compare:
        rows = bench.compare_backends(grid, args.c, spec, args.groups, args.repeats, args.seed)
        print(f"{'NC':>6} {'cgnl compiled':>14} {'cgnl python':>12} {'oracle compiled':>16} {'oracle python':>14}")
        for r in rows:
            print(f"{r['nc']:>6} {bench.format_ns(r['cgnl_compiled']):>14} {bench.format_ns(r['cgnl_python']):>12} "
                  f"{bench.format_ns(r['oracle_compiled']):>16} {bench.format_ns(r['oracle_python']):>14}")
        return EXIT_OK

    backend = None if args.backend == "auto" else args.backend
    print(f"backend: {_backend.NAME if backend is None else backend}; kernel {spec.family} "
          f"P={spec.order}; C={args.c}; G={args.groups}", file=sys.stderr)
    records = bench.run_bench(grid, args.c, spec, args.groups, args.repeats, backend, args.seed,
                              progress=lambda r: print(f"  {r.method} NC={r.n * r.c} done",
                                                       file=sys.stderr))
    text = bench.to_csv(records)
    if args.out:
        args.out.write_text(text)
    print(bench.format_table(records))
    if args.no_check or len(grid) < 2:
        return EXIT_OK
    ok = True
    for name, passed, detail in bench.check_records(records):
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_train_toy(args) -> int:
    from .toy import DivergenceError, ToyTrainConfig, losses_csv, train_toy

    try:
        cfg = ToyTrainConfig(n_samples=args.samples, n=args.n, c=args.c, classes=args.classes,
                             steps=args.steps, learning_rate=args.lr, seed=args.seed,
                             groups=args.groups, shift=args.shift)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    log = None if args.quiet else (lambda s, l: print(f"step {s:4d} loss {l:.6f}", file=sys.stderr)
                                   if s % 20 == 0 else None)
    try:
        losses = train_toy(cfg, _spec(args), on_step=log, threads=args.threads)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = losses_csv(losses)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    print(f"initial loss {losses[0]:.6f}, final loss {losses[-1]:.6f} "
          f"({losses[-1] / losses[0]:.3f}x)", file=sys.stderr)
    return EXIT_OK


def _load_params(path: Path, c: int):
    from .core import PARAM_NAMES, BlockParams
    with np.load(path) as data:
        missing = [k for k in PARAM_NAMES if k not in data]
        if missing:
            raise UsageError(f"{path} lacks {', '.join(missing)}")
        params = BlockParams(**{k: data[k] for k in PARAM_NAMES})
    params.check_channels(c)
    return params


def _geometry(n, height, width, frames):
    if height is None and width is None:
        side = math.isqrt(n // frames) if n % frames == 0 else 0
        if side and frames * side * side == n:
            return side, side
        return 1, n // frames
    if height is None:
        return n // (frames * width), width
    if width is None:
        return height, n // (frames * height)
    return height, width


def cmd_affinity(args) -> int:
    from .analysis import cgnl_affinity, export_mask, nl_affinity
    from .compact import GroupConfig
    from .core import init_params
    from .io import read_feature_map

    x = read_feature_map(args.input)
    n, c = x.shape
    params = _load_params(args.params, c) if args.params else init_params(c, args.seed, "uniform_range")
    if not 0 <= args.ref < n:
        raise UsageError(f"--ref {args.ref} outside [0, {n})")
    if not 0 <= args.ref_channel < c:
        raise UsageError(f"--ref-channel {args.ref_channel} outside [0, {c})")
    height, width = _geometry(n, args.height, args.width, args.frames)
    stem = args.out
    if args.positions_only:
        masks = [(stem, nl_affinity(x, params, args.ref, args.threshold))]
    else:
        found = cgnl_affinity(x, params, _spec(args), GroupConfig(args.groups), args.ref,
                              args.ref_channel, args.threshold)
        masks = [(Path(f"{stem}.c{m.channel_pair[1]}"), m) for m in found]
    for target, m in masks:
        for path in export_mask(m, height, width, target, args.frames):
            print(path)
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "bench": cmd_bench, "train-toy": cmd_train_toy,
            "affinity": cmd_affinity}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, CgnlError, OSError, IndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
