"""Slab/pencil decomposition, distributed transposes and distributed FFT.

The message-passing layer is a deterministic in-process executor: each rank
runs on its own thread and all collectives are blocking synchronization
points, so two runs with the same inputs are bitwise identical. The
communicator contract (``all_to_all_variable``, ``gather_to_root``,
``scatter_from_root``, ``barrier``) is narrow enough that a real MPI adapter
could be substituted without touching the algorithms.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadParameters,
    DeadlockDetected,
    LayoutMismatch,
    RankFailure,
    ShapeError,
)
from .fft_core import GridSpec, get_backend, spectral_shape, _dft_matrix, _apply_matrix

_COLLECTIVE_TIMEOUT = 120.0


class _EngineAbort(Exception):
    """Internal: unwind a rank after the engine recorded a global error."""


class _Engine:
    """Synchronous collective engine shared by all ranks of one SPMD run."""

    def __init__(self, size):
        self.size = size
        self.cond = threading.Condition()
        self.posted = {}
        self.done = set()
        self.failed = {}
        self.generation = 0
        self.results = {}
        self.error = None

    def _maybe_complete(self):
        # lock held
        if self.error is not None or not self.posted:
            return
        live = self.size - len(self.done) - len(self.failed)
        if len(self.posted) != live:
            return
        if self.failed:
            rank, exc = next(iter(self.failed.items()))
            self.error = RankFailure(rank, exc)
        elif self.done:
            self.error = DeadlockDetected(
                f"ranks {sorted(self.done)} finished while ranks "
                f"{sorted(self.posted)} wait on a collective"
            )
        else:
            tags = {tag for tag, _ in self.posted.values()}
            if len(tags) > 1:
                self.error = DeadlockDetected(
                    f"mismatched collective calls: {sorted(tags)}"
                )
            else:
                recv = {
                    j: [self.posted[i][1][j] for i in range(self.size)]
                    for j in range(self.size)
                }
                self.generation += 1
                self.results[self.generation] = recv
                self.posted.clear()
        self.cond.notify_all()

    def exchange(self, rank, tag, sends):
        if len(sends) != self.size:
            raise ValueError("send list must have one entry per rank")
        with self.cond:
            if self.error is not None:
                raise _EngineAbort()
            my_gen = self.generation
            self.posted[rank] = (tag, list(sends))
            self._maybe_complete()
            deadline = _COLLECTIVE_TIMEOUT
            while self.generation == my_gen and self.error is None:
                if not self.cond.wait(timeout=deadline):
                    self.error = DeadlockDetected(
                        f"collective {tag!r} timed out on rank {rank}"
                    )
                    self.cond.notify_all()
            if self.error is not None and self.generation == my_gen:
                raise _EngineAbort()
            gen = my_gen + 1
            recv = self.results[gen].pop(rank)
            if not self.results[gen]:
                del self.results[gen]
            return recv

    def mark_done(self, rank):
        with self.cond:
            self.done.add(rank)
            self._maybe_complete()

    def mark_failed(self, rank, exc):
        with self.cond:
            self.failed[rank] = exc
            self._maybe_complete()
            self.cond.notify_all()


@dataclass
class RankContext:
    """One rank's endpoint: rank id, world size and the collective operations."""

    rank: int
    size: int
    _engine: _Engine

    def all_to_all_variable(self, sends, tag="all_to_all"):
        """Exchange one payload per destination; returns one payload per source."""
        return self._engine.exchange(self.rank, tag, sends)

    def barrier(self):
        self._engine.exchange(self.rank, "barrier", [None] * self.size)

    def gather_to_root(self, payload, root=0):
        sends = [payload if j == root else None for j in range(self.size)]
        recv = self._engine.exchange(self.rank, "gather", sends)
        return list(recv) if self.rank == root else None

    def scatter_from_root(self, payloads, root=0):
        if self.rank == root:
            if payloads is None or len(payloads) != self.size:
                raise ValueError("root must provide one payload per rank")
            sends = list(payloads)
        else:
            sends = [None] * self.size
        recv = self._engine.exchange(self.rank, "scatter", sends)
        return recv[root]

    def broadcast(self, payload, root=0):
        sends = [payload] * self.size if self.rank == root else [None] * self.size
        recv = self._engine.exchange(self.rank, "broadcast", sends)
        return recv[root]

    def allreduce_sum(self, value):
        """Sum a value over all ranks, identical result (and order) everywhere."""
        recv = self._engine.exchange(self.rank, "allreduce", [value] * self.size)
        total = recv[0]
        for item in recv[1:]:
            total = total + item
        return total


def run_spmd(size, program):
    """Run ``program(context)`` once per rank; returns results indexed by rank."""
    if size < 1:
        raise ValueError("size must be >= 1")
    engine = _Engine(size)
    results = [None] * size

    def worker(rank):
        context = RankContext(rank, size, engine)
        try:
            results[rank] = program(context)
        except _EngineAbort:
            return
        except BaseException as exc:  # surfaced below with the rank id
            engine.mark_failed(rank, exc)
            return
        engine.mark_done(rank)

    threads = [
        threading.Thread(target=worker, args=(rank,), name=f"spmd-rank-{rank}")
        for rank in range(size)
    ]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    if isinstance(engine.error, DeadlockDetected):
        raise engine.error
    if engine.failed:
        rank, exc = next(iter(sorted(engine.failed.items())))
        raise RankFailure(rank, exc)
    return results


# ---------------------------------------------------------------------------
# block layouts


def block_bounds(n, nblocks, index):
    """Balanced contiguous split: sizes differ by at most 1, larger blocks first."""
    base, extra = divmod(n, nblocks)
    start = index * base + min(index, extra)
    return start, start + base + (1 if index < extra else 0)


@dataclass(frozen=True)
class BlockLayout:
    """Distribution of a global array: number of blocks per axis.

    Rank coordinates are the row-major unraveling of the rank id over the
    per-axis block counts, so a rank keeps its coordinate along axes whose
    block count is unchanged between two layouts.
    """

    global_shape: tuple
    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "global_shape", tuple(self.global_shape))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if len(self.blocks) != len(self.global_shape):
            raise LayoutMismatch("blocks and global_shape rank mismatch")

    @property
    def size(self):
        return math.prod(self.blocks)

    def coords(self, rank):
        return tuple(int(c) for c in np.unravel_index(rank, self.blocks))

    def slices(self, rank):
        coords = self.coords(rank)
        return tuple(
            slice(*block_bounds(n, nb, c))
            for n, nb, c in zip(self.global_shape, self.blocks, coords)
        )

    def local_shape(self, rank):
        return tuple(s.stop - s.start for s in self.slices(rank))

    def offset(self, rank):
        return tuple(s.start for s in self.slices(rank))


def transpose_exchange(context, local_block, layout_from, layout_to):
    """All-to-all redistribution between two block layouts of the same array.

    Applying the transpose twice (A -> B -> A) returns the original block
    bitwise. Inconsistent layouts across ranks surface as DeadlockDetected
    (the layouts are part of the collective tag).
    """
    if layout_from.global_shape != layout_to.global_shape:
        raise LayoutMismatch(
            f"global shapes differ: {layout_from.global_shape} vs "
            f"{layout_to.global_shape}"
        )
    if layout_from.size != context.size or layout_to.size != context.size:
        raise LayoutMismatch("layout block counts do not multiply to the world size")
    local_block = np.asarray(local_block)
    my_from = layout_from.slices(context.rank)
    if local_block.shape != tuple(s.stop - s.start for s in my_from):
        raise LayoutMismatch(
            f"local block shape {local_block.shape} does not match layout "
            f"{layout_from.local_shape(context.rank)}"
        )

    def intersect(a, b):
        lo = max(a.start, b.start)
        hi = max(lo, min(a.stop, b.stop))
        return lo, hi

    sends = []
    for dest in range(context.size):
        dest_to = layout_to.slices(dest)
        rel = tuple(
            slice(lo - mine.start, hi - mine.start)
            for mine, (lo, hi) in zip(my_from, map(intersect, my_from, dest_to))
        )
        sends.append(np.ascontiguousarray(local_block[rel]))

    tag = f"transpose:{layout_from.global_shape}:{layout_from.blocks}->{layout_to.blocks}"
    recv = context.all_to_all_variable(sends, tag=tag)

    my_to = layout_to.slices(context.rank)
    out = np.empty(
        tuple(s.stop - s.start for s in my_to), dtype=local_block.dtype
    )
    for src in range(context.size):
        src_from = layout_from.slices(src)
        rel = tuple(
            slice(lo - mine.start, hi - mine.start)
            for mine, (lo, hi) in zip(my_to, map(intersect, my_to, src_from))
        )
        out[rel] = recv[src]
    return out


# ---------------------------------------------------------------------------
# decompositions


def pencil_process_grid(size):
    """Canonical near-square factorization: p0 the largest divisor <= sqrt(size)."""
    p0 = 1
    for d in range(1, math.isqrt(size) + 1):
        if size % d == 0:
            p0 = d
    return p0, size // p0


def are_parameters_bad(kind, dims, size):
    """False iff ``dims`` can be decomposed over ``size`` ranks (empty blocks OK).

    Slab always decomposes (ranks beyond the axis length get empty blocks).
    Pencil requires a 3D grid and the canonical p0 x p1 process grid to fit
    the first two axes.
    """
    dims = tuple(int(n) for n in dims)
    if size < 1:
        return True
    if kind == "slab":
        return False
    if kind == "pencil":
        if len(dims) != 3:
            return True
        p0, p1 = pencil_process_grid(size)
        return not (p0 <= dims[0] and p1 <= dims[1])
    raise ValueError(f"unknown decomposition kind {kind!r}")


@dataclass(frozen=True)
class DecompositionInfo:
    """Per-rank physical/spectral block shapes and offsets.

    The spectral layout is transposed: the decomposed axes differ between the
    physical and spectral layouts (slab: axis 0 -> axis 1; pencil: axes
    (0, 1) -> axes (1, 2)), which avoids a final back-transpose.
    """

    kind: str
    proc_grid: tuple
    shapeX_seq: tuple
    shapeX_loc: tuple
    offsetX_loc: tuple
    shapeK_seq: tuple
    shapeK_loc: tuple
    offsetK_loc: tuple

    def layout_x(self, size):
        return BlockLayout(self.shapeX_seq, _blocks_x(self.kind, self.proc_grid,
                                                      len(self.shapeX_seq), size))

    def layout_k(self, size):
        return BlockLayout(self.shapeK_seq, _blocks_k(self.kind, self.proc_grid,
                                                      len(self.shapeX_seq), size))


def _blocks_x(kind, proc_grid, ndim, size):
    if kind == "slab":
        return (size,) + (1,) * (ndim - 1)
    p0, p1 = proc_grid
    return (p0, p1, 1)


def _blocks_k(kind, proc_grid, ndim, size):
    if kind == "slab":
        return (1, size) + (1,) * (ndim - 2)
    p0, p1 = proc_grid
    return (1, p0, p1)


def make_decomposition(kind, grid, context):
    """Build this rank's DecompositionInfo for a slab or pencil split."""
    if are_parameters_bad(kind, grid.dims, context.size):
        raise BadParameters(
            f"{kind} decomposition of {grid.dims} over {context.size} ranks"
        )
    ndim = grid.ndim
    shape_k = spectral_shape(grid.dims)
    proc_grid = (
        (context.size,) if kind == "slab" else pencil_process_grid(context.size)
    )
    lx = BlockLayout(grid.dims, _blocks_x(kind, proc_grid, ndim, context.size))
    lk = BlockLayout(shape_k, _blocks_k(kind, proc_grid, ndim, context.size))
    return DecompositionInfo(
        kind=kind,
        proc_grid=proc_grid,
        shapeX_seq=grid.dims,
        shapeX_loc=lx.local_shape(context.rank),
        offsetX_loc=lx.offset(context.rank),
        shapeK_seq=shape_k,
        shapeK_loc=lk.local_shape(context.rank),
        offsetK_loc=lk.offset(context.rank),
    )


@dataclass(frozen=True)
class DistPlan:
    """Distributed transform plan: grid, decomposition and communicator."""

    backend_id: str
    grid: GridSpec
    decomposition: DecompositionInfo
    context: RankContext

    @property
    def shapeX_loc(self):
        return self.decomposition.shapeX_loc

    @property
    def shapeK_loc(self):
        return self.decomposition.shapeK_loc


def create_dist_plan(backend_id, grid, kind, context):
    backend = get_backend(backend_id)
    if not isinstance(grid, GridSpec):
        grid = GridSpec(*grid)
    return DistPlan(backend.name, grid, make_decomposition(kind, grid, context),
                    context)


# ---------------------------------------------------------------------------
# per-axis 1D transforms (backend-selectable)


def _axis_rfft(backend_id, arr, axis):
    if backend_id == "naive":
        n = arr.shape[axis]
        return _apply_matrix(
            arr.astype(np.complex128, copy=False),
            _dft_matrix(n, -1, rows=n // 2 + 1), axis,
        )
    return np.fft.rfft(arr, axis=axis)


def _axis_fft(backend_id, arr, axis):
    if backend_id == "naive":
        n = arr.shape[axis]
        return _apply_matrix(arr, _dft_matrix(n, -1), axis)
    return np.fft.fft(arr, axis=axis)


def _axis_ifft(backend_id, arr, axis):
    if backend_id == "naive":
        n = arr.shape[axis]
        return _apply_matrix(arr, _dft_matrix(n, +1), axis) / n
    return np.fft.ifft(arr, axis=axis)


def _axis_irfft(backend_id, arr, axis, n):
    if backend_id == "naive":
        arr = np.moveaxis(arr, axis, -1)
        full = np.empty(arr.shape[:-1] + (n,), dtype=np.complex128)
        nk = arr.shape[-1]
        full[..., :nk] = arr
        for j in range(nk, n):
            full[..., j] = np.conj(arr[..., n - j])
        full = _apply_matrix(full, _dft_matrix(n, +1), full.ndim - 1) / n
        return np.moveaxis(full.real, -1, axis)
    return np.fft.irfft(arr, n=n, axis=axis)


# ---------------------------------------------------------------------------
# distributed transforms


def _fft_layouts(plan):
    dec = plan.decomposition
    size = plan.context.size
    shape_k = dec.shapeK_seq
    ndim = len(dec.shapeX_seq)
    if dec.kind == "slab":
        a = BlockLayout(shape_k, (size,) + (1,) * (ndim - 1))
        b = BlockLayout(shape_k, (1, size) + (1,) * (ndim - 2))
        return [a, b]
    p0, p1 = dec.proc_grid
    a = BlockLayout(shape_k, (p0, p1, 1))
    m = BlockLayout(shape_k, (p0, 1, p1))
    c = BlockLayout(shape_k, (1, p0, p1))
    return [a, m, c]


def dist_fft(plan, local_input, local_output):
    """Distributed forward transform; collective over all ranks of the plan."""
    dec = plan.decomposition
    local_input = np.asarray(local_input, dtype=np.float64)
    if local_input.shape != tuple(dec.shapeX_loc):
        raise ShapeError(
            f"local input shape {local_input.shape} != {dec.shapeX_loc}"
        )
    if local_output.shape != tuple(dec.shapeK_loc):
        raise ShapeError(
            f"local output shape {local_output.shape} != {dec.shapeK_loc}"
        )
    ctx = plan.context
    bid = plan.backend_id
    dims = plan.grid.dims
    layouts = _fft_layouts(plan)
    work = _axis_rfft(bid, local_input, axis=len(dims) - 1)
    if dec.kind == "slab":
        if len(dims) == 3:
            work = _axis_fft(bid, work, axis=1)
        work = transpose_exchange(ctx, work, layouts[0], layouts[1])
        work = _axis_fft(bid, work, axis=0)
    else:
        work = transpose_exchange(ctx, work, layouts[0], layouts[1])
        work = _axis_fft(bid, work, axis=1)
        work = transpose_exchange(ctx, work, layouts[1], layouts[2])
        work = _axis_fft(bid, work, axis=0)
    np.copyto(local_output, work / math.prod(dims))


def dist_ifft(plan, local_input, local_output):
    """Distributed inverse transform; reverse composition of dist_fft."""
    dec = plan.decomposition
    local_input = np.asarray(local_input, dtype=np.complex128)
    if local_input.shape != tuple(dec.shapeK_loc):
        raise ShapeError(
            f"local input shape {local_input.shape} != {dec.shapeK_loc}"
        )
    if local_output.shape != tuple(dec.shapeX_loc):
        raise ShapeError(
            f"local output shape {local_output.shape} != {dec.shapeX_loc}"
        )
    ctx = plan.context
    bid = plan.backend_id
    dims = plan.grid.dims
    layouts = _fft_layouts(plan)
    work = _axis_ifft(bid, local_input, axis=0)
    if dec.kind == "slab":
        work = transpose_exchange(ctx, work, layouts[1], layouts[0])
        if len(dims) == 3:
            work = _axis_ifft(bid, work, axis=1)
        work = _axis_irfft(bid, work, axis=len(dims) - 1, n=dims[-1])
    else:
        work = transpose_exchange(ctx, work, layouts[2], layouts[1])
        work = _axis_ifft(bid, work, axis=1)
        work = transpose_exchange(ctx, work, layouts[1], layouts[0])
        work = _axis_irfft(bid, work, axis=2, n=dims[-1])
    np.copyto(local_output, work * math.prod(dims))


# ---------------------------------------------------------------------------
# gather/scatter helpers (testing and IO support)


def _gather_blocks(context, global_shape, layout, local_block, dtype):
    gathered = context.gather_to_root((layout.offset(context.rank),
                                       np.asarray(local_block)))
    if gathered is None:
        return None
    out = np.empty(global_shape, dtype=dtype)
    for offset, block in gathered:
        sl = tuple(slice(o, o + s) for o, s in zip(offset, block.shape))
        out[sl] = block
    return out


def gather_X(context, decomposition, local_block):
    """Assemble the global physical array on the root rank (None elsewhere)."""
    layout = decomposition.layout_x(context.size)
    return _gather_blocks(context, decomposition.shapeX_seq, layout, local_block,
                          np.float64)


def gather_K(context, decomposition, local_block):
    """Assemble the global half spectrum on the root rank (None elsewhere)."""
    layout = decomposition.layout_k(context.size)
    return _gather_blocks(context, decomposition.shapeK_seq, layout, local_block,
                          np.complex128)


def scatter_X(context, decomposition, global_array=None):
    """Distribute a root-held global physical array into per-rank blocks."""
    layout = decomposition.layout_x(context.size)
    if context.rank == 0:
        if global_array is None:
            raise ValueError("root must provide the global array")
        global_array = np.asarray(global_array, dtype=np.float64)
        if global_array.shape != tuple(decomposition.shapeX_seq):
            raise ShapeError(
                f"global shape {global_array.shape} != {decomposition.shapeX_seq}"
            )
        payloads = [
            np.ascontiguousarray(global_array[layout.slices(r)])
            for r in range(context.size)
        ]
    else:
        payloads = None
    return context.scatter_from_root(payloads)
