import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unifft import (
    BadParameters,
    BlockLayout,
    DeadlockDetected,
    GridSpec,
    LayoutMismatch,
    RankFailure,
    ShapeError,
    are_parameters_bad,
    create_dist_plan,
    create_plan,
    dist_fft,
    dist_ifft,
    fft_alloc,
    gather_K,
    gather_X,
    init_random,
    make_decomposition,
    run_spmd,
    scatter_X,
    transpose_exchange,
)
from unifft.decomp import block_bounds, pencil_process_grid


class TestRunSpmd:
    def test_single_rank(self):
        assert run_spmd(1, lambda ctx: ctx.rank) == [0]

    def test_rank_squares(self):
        assert run_spmd(4, lambda ctx: ctx.rank**2) == [0, 1, 4, 9]

    def test_all_to_all_two_ranks(self):
        def program(ctx):
            sends = [f"from{ctx.rank}to{j}" for j in range(ctx.size)]
            return ctx.all_to_all_variable(sends)

        got = run_spmd(2, program)
        assert got[0] == ["from0to0", "from1to0"]
        assert got[1] == ["from0to1", "from1to1"]

    def test_gather_and_scatter(self):
        def program(ctx):
            gathered = ctx.gather_to_root(ctx.rank * 10)
            if ctx.rank == 0:
                assert gathered == [0, 10, 20]
            else:
                assert gathered is None
            return ctx.scatter_from_root(
                ["a", "b", "c"] if ctx.rank == 0 else None
            )

        assert run_spmd(3, program) == ["a", "b", "c"]

    def test_rank_error_surfaced_with_rank_id(self):
        def program(ctx):
            if ctx.rank == 2:
                raise ValueError("boom")
            ctx.barrier()

        with pytest.raises(RankFailure) as err:
            run_spmd(4, program)
        assert err.value.rank == 2
        assert isinstance(err.value.original, ValueError)

    def test_mismatched_collectives_deadlock(self):
        def program(ctx):
            if ctx.rank == 0:
                ctx.all_to_all_variable([None, None])
            else:
                ctx.gather_to_root(1)

        with pytest.raises(DeadlockDetected):
            run_spmd(2, program)

    def test_unbalanced_participation_deadlock(self):
        def program(ctx):
            if ctx.rank == 0:
                ctx.barrier()

        with pytest.raises(DeadlockDetected):
            run_spmd(2, program)

    def test_deterministic_reruns(self):
        def program(ctx):
            local = init_random(GridSpec((4, 4), (1, 1)), ctx.rank).data
            return ctx.allreduce_sum(local)

        first = run_spmd(3, program)
        second = run_spmd(3, program)
        for a, b in zip(first, second):
            assert np.array_equal(a, b)


class TestParameters:
    def test_slab_divisible(self):
        assert are_parameters_bad("slab", (32, 32, 32), 4) is False

    def test_slab_with_empty_blocks(self):
        assert are_parameters_bad("slab", (32, 32, 32), 40) is False

    def test_pencil_oversized_factor(self):
        # 65 = 5 x 13 canonically; p1 = 13 > 8
        assert are_parameters_bad("pencil", (8, 8, 8), 65) is True

    def test_pencil_ok(self):
        assert are_parameters_bad("pencil", (8, 8, 8), 4) is False

    def test_pencil_needs_3d(self):
        assert are_parameters_bad("pencil", (8, 8), 2) is True

    def test_pencil_grid_near_square(self):
        assert pencil_process_grid(4) == (2, 2)
        assert pencil_process_grid(6) == (2, 3)
        assert pencil_process_grid(65) == (5, 13)
        assert pencil_process_grid(7) == (1, 7)


class TestDecomposition:
    def test_slab_even_split(self):
        grid = GridSpec((8, 8, 8), (1, 1, 1))

        def program(ctx):
            return make_decomposition("slab", grid, ctx)

        dec0, dec1 = run_spmd(2, program)
        assert dec0.shapeX_loc == (4, 8, 8) and dec0.offsetX_loc == (0, 0, 0)
        assert dec1.shapeX_loc == (4, 8, 8) and dec1.offsetX_loc == (4, 0, 0)

    def test_slab_balanced_blocks(self):
        grid = GridSpec((5, 4), (1, 1))
        decs = run_spmd(2, lambda ctx: make_decomposition("slab", grid, ctx))
        assert [d.shapeX_loc[0] for d in decs] == [3, 2]

    def test_pencil_grid_blocks(self):
        grid = GridSpec((8, 8, 8), (1, 1, 1))
        decs = run_spmd(4, lambda ctx: make_decomposition("pencil", grid, ctx))
        assert decs[0].proc_grid == (2, 2)
        assert all(d.shapeX_loc == (4, 4, 8) for d in decs)

    def test_bad_parameters_raise(self):
        grid = GridSpec((8, 8, 8), (1, 1, 1))
        with pytest.raises(RankFailure) as err:
            run_spmd(65, lambda ctx: make_decomposition("pencil", grid, ctx))
        assert isinstance(err.value.original, BadParameters)

    @pytest.mark.parametrize("kind,size", [("slab", 3), ("slab", 10),
                                           ("pencil", 4), ("pencil", 6)])
    def test_tiling_exact(self, kind, size):
        grid = GridSpec((8, 6, 10), (1, 1, 1))
        decs = run_spmd(size, lambda ctx: make_decomposition(kind, grid, ctx))
        for seq_name in ("X", "K"):
            marks = np.zeros(
                getattr(decs[0], f"shape{seq_name}_seq"), dtype=int
            )
            for dec in decs:
                sl = tuple(
                    slice(o, o + s)
                    for o, s in zip(getattr(dec, f"offset{seq_name}_loc"),
                                    getattr(dec, f"shape{seq_name}_loc"))
                )
                marks[sl] += 1
            assert np.all(marks == 1)


class TestTranspose:
    def test_single_rank_identity(self):
        layout = BlockLayout((4, 4), (1, 1))
        block = np.arange(16, dtype=complex).reshape(4, 4)

        def program(ctx):
            return transpose_exchange(ctx, block, layout, layout)

        assert np.array_equal(run_spmd(1, program)[0], block)

    def test_row_to_column_split(self):
        full = (np.arange(16) + 1j * np.arange(16)[::-1]).reshape(4, 4)
        rows = BlockLayout((4, 4), (2, 1))
        cols = BlockLayout((4, 4), (1, 2))

        def program(ctx):
            mine = full[rows.slices(ctx.rank)]
            moved = transpose_exchange(ctx, mine, rows, cols)
            return moved

        got = run_spmd(2, program)
        for rank, block in enumerate(got):
            assert np.array_equal(block, full[cols.slices(rank)])

    def test_involution_bitwise(self):
        full = np.random.default_rng(0).normal(size=(6, 5)).astype(complex)
        a = BlockLayout((6, 5), (3, 1))
        b = BlockLayout((6, 5), (1, 3))

        def program(ctx):
            mine = full[a.slices(ctx.rank)].copy()
            there = transpose_exchange(ctx, mine, a, b)
            back = transpose_exchange(ctx, there, b, a)
            return np.array_equal(back, mine)

        assert all(run_spmd(3, program))

    def test_layout_mismatch(self):
        a = BlockLayout((4, 4), (2, 1))
        b = BlockLayout((6, 4), (1, 2))

        def program(ctx):
            block = np.zeros(a.local_shape(ctx.rank), dtype=complex)
            transpose_exchange(ctx, block, a, b)

        with pytest.raises(RankFailure) as err:
            run_spmd(2, program)
        assert isinstance(err.value.original, LayoutMismatch)

    def test_inconsistent_layouts_across_ranks(self):
        shape = (4, 4)
        a = BlockLayout(shape, (2, 1))
        b = BlockLayout(shape, (1, 2))

        def program(ctx):
            block = np.zeros(a.local_shape(ctx.rank), dtype=complex)
            if ctx.rank == 0:
                transpose_exchange(ctx, block, a, b)
            else:
                transpose_exchange(ctx, block, a, a)

        with pytest.raises(DeadlockDetected):
            run_spmd(2, program)


def _dist_roundtrip_errors(grid, kind, size, backend="fast", seed=7):
    """Gathered dist_fft vs sequential fft, and distributed roundtrip error."""
    u = init_random(grid, seed)
    ref = fft_alloc(create_plan(backend, grid), u).data

    def program(ctx):
        plan = create_dist_plan(backend, grid, kind, ctx)
        local = scatter_X(ctx, plan.decomposition,
                          u.data if ctx.rank == 0 else None)
        spec = np.empty(plan.shapeK_loc, dtype=complex)
        dist_fft(plan, local, spec)
        gathered = gather_K(ctx, plan.decomposition, spec)
        back = np.empty(plan.shapeX_loc)
        dist_ifft(plan, spec, back)
        roundtrip_err = np.max(np.abs(back - local)) if back.size else 0.0
        fft_err = (
            np.max(np.abs(gathered - ref)) if ctx.rank == 0 else None
        )
        return fft_err, float(roundtrip_err)

    results = run_spmd(size, program)
    fft_err = results[0][0]
    roundtrip_err = max(r[1] for r in results)
    return fft_err, roundtrip_err


class TestDistFft:
    def test_size_one_matches_sequential(self):
        grid = GridSpec((8, 8, 8), (1, 1, 1))
        fft_err, rt_err = _dist_roundtrip_errors(grid, "slab", 1)
        assert fft_err < 1e-12 and rt_err < 1e-10

    @pytest.mark.parametrize("kind", ["slab", "pencil"])
    @pytest.mark.parametrize("size", [2, 3, 4, 6, 8])
    def test_gathered_matches_sequential(self, kind, size):
        grid = GridSpec((8, 8, 8), (1, 1, 1))
        fft_err, rt_err = _dist_roundtrip_errors(grid, kind, size)
        assert fft_err < 1e-10
        assert rt_err < 1e-10

    def test_uneven_axes_pencil(self):
        grid = GridSpec((12, 8, 10), (1.5, 2.0, 3.0))
        fft_err, rt_err = _dist_roundtrip_errors(grid, "pencil", 4)
        assert fft_err < 1e-10 and rt_err < 1e-10

    def test_2d_slab(self):
        grid = GridSpec((8, 6), (1.0, 2.0))
        fft_err, rt_err = _dist_roundtrip_errors(grid, "slab", 3)
        assert fft_err < 1e-10 and rt_err < 1e-10

    def test_empty_blocks(self):
        grid = GridSpec((8, 8, 8), (1, 1, 1))
        fft_err, rt_err = _dist_roundtrip_errors(grid, "slab", 10)
        assert fft_err < 1e-10 and rt_err < 1e-10

    def test_slab_pencil_agree(self):
        grid = GridSpec((8, 8, 8), (1, 1, 1))
        u = init_random(grid, 3)

        def make_program(kind):
            def program(ctx):
                plan = create_dist_plan("fast", grid, kind, ctx)
                local = scatter_X(ctx, plan.decomposition,
                                  u.data if ctx.rank == 0 else None)
                spec = np.empty(plan.shapeK_loc, dtype=complex)
                dist_fft(plan, local, spec)
                return gather_K(ctx, plan.decomposition, spec)
            return program

        slab = run_spmd(4, make_program("slab"))[0]
        pencil = run_spmd(4, make_program("pencil"))[0]
        assert np.max(np.abs(slab - pencil)) < 1e-10

    def test_naive_backend_distributed(self):
        grid = GridSpec((6, 8, 4), (1, 1, 1))
        fft_err, rt_err = _dist_roundtrip_errors(grid, "slab", 2, backend="naive")
        assert fft_err < 1e-10 and rt_err < 1e-10

    def test_shape_error(self):
        grid = GridSpec((8, 8, 8), (1, 1, 1))

        def program(ctx):
            plan = create_dist_plan("fast", grid, "slab", ctx)
            wrong = np.zeros((3, 3, 3))
            out = np.empty(plan.shapeK_loc, dtype=complex)
            dist_fft(plan, wrong, out)

        with pytest.raises(RankFailure) as err:
            run_spmd(2, program)
        assert isinstance(err.value.original, ShapeError)

    def test_determinism_bitwise(self):
        grid = GridSpec((8, 8, 8), (1, 1, 1))
        u = init_random(grid, 5)

        def program(ctx):
            plan = create_dist_plan("fast", grid, "pencil", ctx)
            local = scatter_X(ctx, plan.decomposition,
                              u.data if ctx.rank == 0 else None)
            spec = np.empty(plan.shapeK_loc, dtype=complex)
            dist_fft(plan, local, spec)
            return spec

        first = run_spmd(4, program)
        second = run_spmd(4, program)
        for a, b in zip(first, second):
            assert np.array_equal(a, b)


class TestGatherScatter:
    def test_size_one_identity(self):
        grid = GridSpec((4, 4), (1, 1))
        u = init_random(grid, 0)

        def program(ctx):
            dec = make_decomposition("slab", grid, ctx)
            local = scatter_X(ctx, dec, u.data)
            return gather_X(ctx, dec, local)

        assert np.array_equal(run_spmd(1, program)[0], u.data)

    def test_ramp_field_tiles(self):
        grid = GridSpec((4, 4), (1, 1))
        ramp = np.arange(16, dtype=float).reshape(4, 4)

        def program(ctx):
            dec = make_decomposition("slab", grid, ctx)
            local = scatter_X(ctx, dec, ramp if ctx.rank == 0 else None)
            return local

        blocks = run_spmd(2, program)
        assert np.array_equal(blocks[0], ramp[:2])
        assert np.array_equal(blocks[1], ramp[2:])

    def test_gather_scatter_inverse_bitwise(self):
        grid = GridSpec((5, 6, 4), (1, 1, 1))
        u = init_random(grid, 12)

        def program(ctx):
            dec = make_decomposition("slab", grid, ctx)
            local = scatter_X(ctx, dec, u.data if ctx.rank == 0 else None)
            back = gather_X(ctx, dec, local)
            if ctx.rank == 0:
                return np.array_equal(back, u.data)
            return back is None

        assert all(run_spmd(3, program))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), nblocks=st.integers(1, 12))
def test_block_bounds_partition(n, nblocks):
    bounds = [block_bounds(n, nblocks, b) for b in range(nblocks)]
    assert bounds[0][0] == 0 and bounds[-1][1] == n
    sizes = [hi - lo for lo, hi in bounds]
    assert max(sizes) - min(sizes) <= 1
    assert sorted(sizes, reverse=True) == sizes  # larger blocks first
    for (lo1, hi1), (lo2, _) in zip(bounds, bounds[1:]):
        assert hi1 == lo2
