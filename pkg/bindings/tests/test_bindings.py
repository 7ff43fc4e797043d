import numpy as np
import pytest

import unifft
from unifft import (
    BackendUnavailable,
    GridSpec,
    RealField,
    ShapeError,
    build_operator_grid,
    create_plan,
    fft_alloc,
    gradfft_from_fft,
)
from unifft_bindings import BoundOperator, create_operator, resolve_backend


class TestConstruction:
    def test_2d_shapes(self):
        oper = create_operator(8, 6)
        assert oper.shapeX == (6, 8)
        assert oper.shapeK == (6, 5)
        assert oper.KX.shape == (6, 5)
        assert oper.ZZ is None and oper.KZ is None

    def test_3d_shapes(self):
        oper = create_operator(8, 6, nz=4, lz=1.0)
        assert oper.shapeX == (4, 6, 8)
        assert oper.shapeK == (4, 6, 5)
        assert oper.KZ is not None

    def test_coordinate_arrays_match_core(self):
        oper = create_operator(100, 100)
        assert oper.XX.shape == (100, 100)
        og = build_operator_grid(
            create_plan(oper.backend_id, GridSpec((100, 100),
                                                  (2 * np.pi, 2 * np.pi)))
        )
        assert np.array_equal(oper.XX, og.XX)
        assert np.array_equal(oper.KY, og.KY)

    def test_arrays_are_read_only(self):
        oper = create_operator(8, 8)
        with pytest.raises(ValueError):
            oper.KX[0, 0] = 5.0

    def test_default_backend_prefers_fast(self):
        assert resolve_backend("default") == "fast"
        assert resolve_backend(None) == "fast"
        assert resolve_backend("naive") == "naive"

    def test_unknown_backend_error_names_it(self):
        with pytest.raises(BackendUnavailable, match="cufft"):
            create_operator(8, 8, backend="cufft")

    def test_incomplete_third_axis_rejected(self):
        with pytest.raises(ValueError):
            create_operator(8, 8, nz=4)
        with pytest.raises(ValueError):
            create_operator(8, 8, lz=1.0)

    def test_version_mirrors_core(self):
        import unifft_bindings

        assert unifft_bindings.__version__ == unifft.__version__


class TestTransforms:
    def test_roundtrip_2d(self):
        oper = create_operator(12, 10, lx=1.0, ly=3.0)
        rng = np.random.default_rng(5)
        u = rng.normal(size=oper.shapeX)
        back = oper.ifft(oper.fft(u))
        assert np.max(np.abs(back - u)) <= 1e-12

    def test_roundtrip_3d(self):
        oper = create_operator(8, 6, nz=4, lz=1.0)
        rng = np.random.default_rng(6)
        u = rng.normal(size=oper.shapeX)
        assert np.max(np.abs(oper.ifft(oper.fft(u)) - u)) <= 1e-12

    def test_accepts_array_likes_and_noncontiguous(self):
        oper = create_operator(4, 4)
        u = np.asfortranarray(np.arange(16.0).reshape(4, 4))
        u_fft = oper.fft(u)
        assert u_fft[0, 0] == pytest.approx(np.mean(u))
        assert np.max(np.abs(oper.ifft(list(map(list, u_fft))) - u)) <= 1e-12

    def test_wrong_shape_reports_both_shapes(self):
        oper = create_operator(8, 8)
        with pytest.raises(ShapeError, match=r"\(4, 4\).*\(8, 8\)"):
            oper.fft(np.zeros((4, 4)))
        with pytest.raises(ShapeError):
            oper.ifft(np.zeros((8, 8), dtype=complex))

    def test_sine_gradient_matches_core(self):
        """Worked example through the bindings equals the core paths."""
        oper = create_operator(100, 100)
        u = np.sin(oper.XX + oper.YY)
        px_fft, py_fft = oper.gradfft_from_fft(oper.fft(u))
        expected = np.cos(oper.XX + oper.YY)
        assert np.max(np.abs(oper.ifft(px_fft) - expected)) <= 1e-10
        assert np.max(np.abs(oper.ifft(py_fft) - expected)) <= 1e-10

        grid = GridSpec((100, 100), (2 * np.pi, 2 * np.pi))
        plan = create_plan(oper.backend_id, grid)
        og = build_operator_grid(plan)
        core_px, core_py = gradfft_from_fft(
            og, fft_alloc(plan, RealField(grid, u))
        )
        assert np.max(np.abs(px_fft - core_px.data)) <= 1e-12
        assert np.max(np.abs(py_fft - core_py.data)) <= 1e-12


class TestProjection:
    def test_projected_field_is_divergence_free(self):
        oper = create_operator(8, 8, nz=8, lz=2 * np.pi)
        rng = np.random.default_rng(7)
        v = tuple(
            rng.normal(size=oper.shapeK) + 1j * rng.normal(size=oper.shapeK)
            for _ in range(3)
        )
        rx, ry, rz = oper.project_divergence_free(*v)
        div = 1j * (oper.KX * rx + oper.KY * ry + oper.KZ * rz)
        assert np.max(np.abs(div)) <= 1e-12

    def test_projection_2d_and_idempotent(self):
        oper = create_operator(16, 16)
        rng = np.random.default_rng(8)
        v = tuple(
            rng.normal(size=oper.shapeK) + 1j * rng.normal(size=oper.shapeK)
            for _ in range(2)
        )
        once = oper.project_divergence_free(*v)
        twice = oper.project_divergence_free(*once)
        for a, b in zip(once, twice):
            assert np.max(np.abs(a - b)) <= 1e-14

    def test_component_count_checked(self):
        oper = create_operator(8, 8, nz=8, lz=1.0)
        v = np.zeros(oper.shapeK, dtype=complex)
        with pytest.raises(ShapeError, match="3 velocity components"):
            oper.project_divergence_free(v, v)
