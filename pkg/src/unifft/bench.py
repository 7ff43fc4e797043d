"""Benchmark harness: timed transform variants, median aggregation,
strong-scaling speedup tables and report emission (json/csv/svg).

Timing methodology: each measurement times N consecutive transform calls
(default N=20); R such measurements are recorded (default R=5) and the median
over R is used for speedup. Raw elapsed times for N iterations are stored and
never divided. For distributed runs the per-repeat time is the maximum across
ranks of a barrier-bracketed region. One untimed warmup call precedes the
measurements.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .decomp import DistPlan, dist_fft, dist_ifft, scatter_X
from .errors import EmptyInput, ShapeError, UnifftError
from .fft_core import (
    FftPlan,
    RealField,
    SpectralField,
    fft_alloc,
    fft_into,
    get_backend,
    ifft_alloc,
    ifft_into,
    init_random,
)

SCHEMA_VERSION = 1

VARIANTS = ("core_into", "api_into", "api_alloc")
DIRECTIONS = ("fft", "ifft")


@dataclass
class BenchRecord:
    """One timed measurement set for a (backend, variant, direction, shape)."""

    backend_id: str
    variant: str
    direction: str
    dims: tuple
    kind: str
    size: int
    iterations: int
    elapsed_seconds: list

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.elapsed_seconds = [float(t) for t in self.elapsed_seconds]
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.elapsed_seconds or any(t <= 0 for t in self.elapsed_seconds):
            raise ValueError("elapsed_seconds must be non-empty and positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, payload):
        return cls(**payload)


def median_time(record):
    """Median of the recorded elapsed times (mean of central pair when even)."""
    return float(statistics.median(record.elapsed_seconds))


def _check_variants_agree(plan, u, u_fft):
    """Value-equality of all call variants, asserted before any timing."""
    alloc = fft_alloc(plan, u)
    into = SpectralField.zeros(plan.grid)
    fft_into(plan, u, into)
    if not np.allclose(alloc.data, into.data, rtol=0, atol=1e-12):
        raise UnifftError("fft variants disagree; timing aborted")
    back_alloc = ifft_alloc(plan, u_fft)
    back_into = RealField.zeros(plan.grid)
    ifft_into(plan, u_fft, back_into)
    if not np.allclose(back_alloc.data, back_into.data, rtol=0, atol=1e-12):
        raise UnifftError("ifft variants disagree; timing aborted")


def _run_bench_seq(plan, direction, variant, iterations, repeats, seed):
    backend = get_backend(plan.backend_id)
    dims = plan.grid.dims
    u = init_random(plan.grid, seed)
    u_fft = fft_alloc(plan, u)
    _check_variants_agree(plan, u, u_fft)

    out_k = SpectralField.zeros(plan.grid)
    out_x = RealField.zeros(plan.grid)
    if direction == "fft":
        calls = {
            "core_into": lambda: np.copyto(out_k.data, backend.forward(u.data, dims)),
            "api_into": lambda: fft_into(plan, u, out_k),
            "api_alloc": lambda: fft_alloc(plan, u),
        }
    else:
        calls = {
            "core_into": lambda: np.copyto(
                out_x.data, backend.inverse(u_fft.data, dims)
            ),
            "api_into": lambda: ifft_into(plan, u_fft, out_x),
            "api_alloc": lambda: ifft_alloc(plan, u_fft),
        }
    call = calls[variant]
    call()  # warmup
    elapsed = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(iterations):
            call()
        elapsed.append(time.perf_counter() - t0)
    return BenchRecord(
        backend_id=plan.backend_id,
        variant=variant,
        direction=direction,
        dims=dims,
        kind="seq",
        size=1,
        iterations=iterations,
        elapsed_seconds=elapsed,
    )


def _run_bench_dist(plan, direction, variant, iterations, repeats, seed):
    ctx = plan.context
    dec = plan.decomposition
    global_u = init_random(plan.grid, seed).data if ctx.rank == 0 else None
    local_u = scatter_X(ctx, dec, global_u)
    local_k = np.empty(dec.shapeK_loc, dtype=np.complex128)
    dist_fft(plan, local_u, local_k)
    local_x = np.empty(dec.shapeX_loc, dtype=np.float64)

    if direction == "fft":
        if variant == "api_alloc":
            def call():
                out = np.empty(dec.shapeK_loc, dtype=np.complex128)
                dist_fft(plan, local_u, out)
        else:
            def call():
                dist_fft(plan, local_u, local_k)
    else:
        if variant == "api_alloc":
            def call():
                out = np.empty(dec.shapeX_loc, dtype=np.float64)
                dist_ifft(plan, local_k, out)
        else:
            def call():
                dist_ifft(plan, local_k, local_x)

    call()  # warmup
    elapsed = []
    for _ in range(repeats):
        ctx.barrier()
        t0 = time.perf_counter()
        for _ in range(iterations):
            call()
        ctx.barrier()
        mine = time.perf_counter() - t0
        # wall-clock semantics: per-repeat time is the max across ranks
        elapsed.append(max(ctx.allreduce_sum([mine])))
    return BenchRecord(
        backend_id=plan.backend_id,
        variant=variant,
        direction=direction,
        dims=plan.grid.dims,
        kind=dec.kind,
        size=ctx.size,
        iterations=iterations,
        elapsed_seconds=elapsed,
    )


def run_bench(plan, direction, variant, iterations=20, repeats=5, seed=0):
    """Time ``iterations`` consecutive transforms, ``repeats`` times.

    ``plan`` may be sequential (FftPlan) or distributed (DistPlan, in which
    case the call is collective and every rank returns an identical record).
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if iterations < 1 or repeats < 1:
        raise ValueError("iterations and repeats must be >= 1")
    if isinstance(plan, DistPlan):
        return _run_bench_dist(plan, direction, variant, iterations, repeats, seed)
    return _run_bench_seq(plan, direction, variant, iterations, repeats, seed)


# ---------------------------------------------------------------------------
# speedup tables


@dataclass
class SpeedupTable:
    """Strong-scaling speedups for one (dims, direction, variant) group.

    S(backend, n_p) = fastest median time at n_p_min * n_p_min / median time;
    the fastest backend's S at n_p_min equals n_p_min by construction. Ties
    for "fastest" break lexicographically on backend_id.
    """

    dims: tuple
    direction: str
    variant: str
    n_p_min: int
    fastest_backend_at_min: str
    speedups: dict  # backend_id -> {n_p: S}
    median_times: dict  # backend_id -> {n_p: median seconds}

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.speedups = {
            b: {int(n): float(s) for n, s in table.items()}
            for b, table in self.speedups.items()
        }
        self.median_times = {
            b: {int(n): float(t) for n, t in table.items()}
            for b, table in self.median_times.items()
        }

    def to_dict(self):
        return {
            "dims": list(self.dims),
            "direction": self.direction,
            "variant": self.variant,
            "n_p_min": self.n_p_min,
            "fastest_backend_at_min": self.fastest_backend_at_min,
            "speedups": {
                b: {str(n): s for n, s in table.items()}
                for b, table in self.speedups.items()
            },
            "median_times": {
                b: {str(n): t for n, t in table.items()}
                for b, table in self.median_times.items()
            },
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            dims=tuple(payload["dims"]),
            direction=payload["direction"],
            variant=payload["variant"],
            n_p_min=int(payload["n_p_min"]),
            fastest_backend_at_min=payload["fastest_backend_at_min"],
            speedups={
                b: {int(n): float(s) for n, s in table.items()}
                for b, table in payload["speedups"].items()
            },
            median_times={
                b: {int(n): float(t) for n, t in table.items()}
                for b, table in payload["median_times"].items()
            },
        )


def compute_speedup(records):
    """Speedup table from records sharing dims, direction and variant."""
    records = list(records)
    if not records:
        raise EmptyInput("no benchmark records")
    dims = records[0].dims
    direction = records[0].direction
    variant = records[0].variant
    for rec in records:
        if (rec.dims, rec.direction, rec.variant) != (dims, direction, variant):
            raise ValueError("records must share dims, direction and variant")

    medians = {}
    for rec in records:
        medians.setdefault(rec.backend_id, {})[rec.size] = median_time(rec)

    n_p_min = min(n for table in medians.values() for n in table)
    at_min = {b: t[n_p_min] for b, t in medians.items() if n_p_min in t}
    fastest = min(at_min, key=lambda b: (at_min[b], b))
    numerator = at_min[fastest] * n_p_min

    speedups = {
        b: {n: numerator / t for n, t in table.items()}
        for b, table in medians.items()
    }
    return SpeedupTable(
        dims=dims,
        direction=direction,
        variant=variant,
        n_p_min=n_p_min,
        fastest_backend_at_min=fastest,
        speedups=speedups,
        median_times=medians,
    )


def group_records(records):
    """Group records by (dims, direction, variant) for table computation."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.dims, rec.direction, rec.variant), []).append(rec)
    return groups


# ---------------------------------------------------------------------------
# report emission


def _svg_speedup_chart(table, width=640, height=480, margin=60):
    """Hand-rolled log-log speedup chart: one polyline per backend plus an
    ideal-scaling reference line."""
    points = {
        b: sorted(t.items()) for b, t in table.speedups.items() if t
    }
    all_np = [n for t in points.values() for n, _ in t]
    all_s = [s for t in points.values() for _, s in t]
    if not all_np:
        all_np, all_s = [1], [1.0]
    lo_x, hi_x = min(all_np), max(max(all_np), min(all_np) + 1)
    ideal = [(n, float(n)) for n in sorted(set(all_np))]
    lo_y = min(min(all_s), lo_x)
    hi_y = max(max(all_s), hi_x, lo_y * 1.0000001)

    def sx(n):
        frac = (math.log(n) - math.log(lo_x)) / (math.log(hi_x) - math.log(lo_x))
        return margin + frac * (width - 2 * margin)

    def sy(s):
        frac = (math.log(s) - math.log(lo_y)) / (math.log(hi_y) - math.log(lo_y))
        return height - margin - frac * (height - 2 * margin)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">speedup vs processes '
        f'({"x".join(map(str, table.dims))}, {table.direction}, '
        f'{table.variant})</text>',
    ]
    ideal_pts = " ".join(f"{sx(n):.2f},{sy(s):.2f}" for n, s in ideal)
    parts.append(
        f'<polyline points="{ideal_pts}" fill="none" stroke="#888888" '
        f'stroke-dasharray="5,5" data-series="ideal"/>'
    )
    for i, (backend, pts) in enumerate(sorted(points.items())):
        coords = " ".join(f"{sx(n):.2f},{sy(s):.2f}" for n, s in pts)
        color = palette[i % len(palette)]
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="2" data-series="{backend}"/>'
        )
        for n, s in pts:
            parts.append(
                f'<circle cx="{sx(n):.2f}" cy="{sy(s):.2f}" r="3" '
                f'fill="{color}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)


def emit_report(tables, records, out_dir, formats=("json",)):
    """Write the benchmark report; returns the list of written file paths.

    json: schema-versioned full records plus tables (round-trips exactly);
    csv: one flat row per (backend, variant, direction, n_p);
    svg: one log-log chart per table with an ideal-scaling reference line.
    """
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(tables, SpeedupTable):
        tables = [tables]
    tables = list(tables)
    records = list(records)
    formats = set(formats)
    unknown = formats - {"json", "csv", "svg"}
    if unknown:
        raise ValueError(f"unknown report formats: {sorted(unknown)}")
    written = []
    try:
        if "json" in formats:
            path = out_dir / "report.json"
            payload = {
                "schema_version": SCHEMA_VERSION,
                "records": [r.to_dict() for r in records],
                "tables": [t.to_dict() for t in tables],
            }
            path.write_text(json.dumps(payload, indent=2))
            written.append(str(path))
        if "csv" in formats:
            path = out_dir / "report.csv"
            lookup = {
                (t.dims, t.direction, t.variant): t for t in tables
            }
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(
                    ["backend", "variant", "direction", "n_p", "median_s",
                     "speedup"]
                )
                for rec in records:
                    table = lookup.get((rec.dims, rec.direction, rec.variant))
                    speedup = ""
                    if table is not None:
                        speedup = table.speedups[rec.backend_id][rec.size]
                    writer.writerow(
                        [rec.backend_id, rec.variant, rec.direction, rec.size,
                         median_time(rec), speedup]
                    )
            written.append(str(path))
        if "svg" in formats:
            for i, table in enumerate(tables):
                name = (
                    f"speedup_{'x'.join(map(str, table.dims))}_"
                    f"{table.direction}_{table.variant}.svg"
                )
                path = out_dir / name
                path.write_text(_svg_speedup_chart(table))
                written.append(str(path))
    except OSError as exc:
        raise UnifftError(f"failed writing report under {out_dir}: {exc}") from exc
    return written


def load_records(path):
    """Read benchmark records back from a schema-versioned json report."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise UnifftError(
            f"unsupported schema version in {path}: {payload.get('schema_version')}"
        )
    return [BenchRecord.from_dict(r) for r in payload["records"]]


def load_tables(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise UnifftError(
            f"unsupported schema version in {path}: {payload.get('schema_version')}"
        )
    return [SpeedupTable.from_dict(t) for t in payload["tables"]]
