"""Command-line tools: ``unifft-bench`` runs benchmarks, ``unifft-bench-analysis``
recomputes speedup tables from saved json records.

Exit codes: 0 success, 2 invalid parameters (including incompatible
shape/process-count combinations), 1 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .bench import (
    compute_speedup,
    emit_report,
    group_records,
    load_records,
    median_time,
    run_bench,
)
from .decomp import are_parameters_bad, create_dist_plan, run_spmd
from .errors import UnifftError
from .fft_core import GridSpec, available_backends, create_plan

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_BAD_PARAMS = 2


def _parse_dims(text):
    try:
        dims = tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse dims {text!r}")
    if len(dims) not in (2, 3):
        raise argparse.ArgumentTypeError("dims must be N0xN1 or N0xN1xN2")
    return dims


def _parse_lengths(text):
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse lengths {text!r}")


def _parse_formats(text):
    formats = {part.strip() for part in text.split(",") if part.strip()}
    unknown = formats - {"json", "csv", "svg"}
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown formats: {sorted(unknown)}")
    return formats


def _bench_parser():
    parser = argparse.ArgumentParser(
        prog="unifft-bench",
        description="Benchmark FFT backends and call variants.",
    )
    parser.add_argument("--dims", type=_parse_dims, required=True,
                        help="global shape, e.g. 16x16x16")
    parser.add_argument("--lengths", type=_parse_lengths, default=None,
                        help="domain lengths L0,L1[,L2] (default 2*pi each)")
    parser.add_argument("--backend", action="append", default=None,
                        help="backend id, repeatable (default: all available)")
    parser.add_argument("--kind", choices=("seq", "slab", "pencil"),
                        default="seq")
    parser.add_argument("--np", dest="nps", action="append", type=int,
                        default=None, help="process count, repeatable")
    parser.add_argument("--iterations", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("bench-results"))
    parser.add_argument("--formats", type=_parse_formats, default={"json"})
    return parser


def main_bench(argv=None):
    parser = _bench_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_BAD_PARAMS if exc.code else EXIT_OK

    dims = args.dims
    lengths = args.lengths or tuple(2 * math.pi for _ in dims)
    backends = args.backend or available_backends()
    nps = args.nps or [1]

    if len(lengths) != len(dims):
        print("error: lengths must match dims", file=sys.stderr)
        return EXIT_BAD_PARAMS
    if args.iterations < 1 or args.repeats < 1:
        print("error: iterations and repeats must be >= 1", file=sys.stderr)
        return EXIT_BAD_PARAMS
    unknown = [b for b in backends if b not in available_backends()]
    if unknown:
        print(f"error: unknown backends {unknown}", file=sys.stderr)
        return EXIT_BAD_PARAMS
    if args.kind == "seq":
        if any(n != 1 for n in nps):
            print("error: --kind seq requires --np 1", file=sys.stderr)
            return EXIT_BAD_PARAMS
    else:
        for n in nps:
            if n < 1 or are_parameters_bad(args.kind, dims, n):
                print(
                    f"error: {args.kind} decomposition of "
                    f"{'x'.join(map(str, dims))} with {n} processes is invalid",
                    file=sys.stderr,
                )
                return EXIT_BAD_PARAMS

    try:
        grid = GridSpec(dims, lengths)
    except UnifftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_PARAMS

    records = []
    try:
        for backend in backends:
            for n in nps:
                for direction in ("fft", "ifft"):
                    for variant in ("core_into", "api_into", "api_alloc"):
                        if args.kind == "seq":
                            plan = create_plan(backend, grid)
                            rec = run_bench(
                                plan, direction, variant,
                                iterations=args.iterations,
                                repeats=args.repeats, seed=args.seed,
                            )
                        else:
                            def worker(ctx, backend=backend,
                                       direction=direction, variant=variant):
                                plan = create_dist_plan(
                                    backend, grid, args.kind, ctx
                                )
                                return run_bench(
                                    plan, direction, variant,
                                    iterations=args.iterations,
                                    repeats=args.repeats, seed=args.seed,
                                )
                            rec = run_spmd(n, worker)[0]
                        records.append(rec)
                        print(
                            f"{backend:>8s} {args.kind} np={n} {direction} "
                            f"{variant}: median {median_time(rec):.6g} s "
                            f"for {rec.iterations} iterations"
                        )
        tables = [compute_speedup(group) for group in
                  group_records(records).values()]
        written = emit_report(tables, records, args.out, args.formats)
    except UnifftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _analysis_parser():
    parser = argparse.ArgumentParser(
        prog="unifft-bench-analysis",
        description="Recompute speedup tables from saved benchmark records.",
    )
    parser.add_argument("--in", dest="in_dir", type=Path, required=True)
    parser.add_argument("--out", type=Path, default=Path("bench-analysis"))
    parser.add_argument("--formats", type=_parse_formats,
                        default={"json", "csv", "svg"})
    return parser


def main_analysis(argv=None):
    parser = _analysis_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_BAD_PARAMS if exc.code else EXIT_OK

    if not args.in_dir.is_dir():
        print(f"error: {args.in_dir} is not a directory", file=sys.stderr)
        return EXIT_BAD_PARAMS
    records = []
    try:
        for path in sorted(args.in_dir.glob("*.json")):
            records.extend(load_records(path))
        if not records:
            print(f"error: no records found under {args.in_dir}",
                  file=sys.stderr)
            return EXIT_BAD_PARAMS
        tables = [compute_speedup(group) for group in
                  group_records(records).values()]
        written = emit_report(tables, records, args.out, args.formats)
    except UnifftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main_bench())
