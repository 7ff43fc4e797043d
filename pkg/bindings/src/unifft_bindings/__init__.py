"""High-level scripting interface over the unifft core.

Construct an operator for a grid, read its coordinate/wavenumber arrays and
call fft/ifft/gradient/projection on plain numpy arrays:

    import numpy as np
    from unifft_bindings import create_operator

    oper = create_operator(100, 100, lx=2 * np.pi, ly=2 * np.pi)
    u = np.sin(oper.XX + oper.YY)
    u_fft = oper.fft(u)
    px_u_fft, py_u_fft = oper.gradfft_from_fft(u_fft)
    px_u = oper.ifft(px_u_fft)
    py_u = oper.ifft(py_u_fft)
"""

from __future__ import annotations

import math

import numpy as np

import unifft
from unifft import (
    GridSpec,
    RealField,
    ShapeError,
    SpectralField,
    available_backends,
    create_plan,
)
from unifft.operators import (
    build_operator_grid,
    gradfft_from_fft as _core_gradfft,
    proj_outplace as _core_proj,
)

__version__ = unifft.__version__

# preference order used for backend="default": fastest first
DEFAULT_BACKEND_ORDER = ("fast", "naive")


def resolve_backend(backend):
    """Map "default"/None to the first available backend in preference order."""
    if backend in (None, "default"):
        registered = available_backends()
        for name in DEFAULT_BACKEND_ORDER:
            if name in registered:
                return name
        return registered[0]
    return backend


def _readonly(array):
    view = array.view()
    view.flags.writeable = False
    return view


class BoundOperator:
    """Operator bound to one grid and one backend.

    Array attributes (XX, YY[, ZZ], KX, KY[, KZ]) are read-only views of the
    core's arrays; copy before mutating. The into-style core paths are reused
    directly, so apart from one marshaling copy on non-contiguous or
    non-float64 input there are no hidden copies.
    """

    def __init__(self, nx, ny, nz=None, lx=2 * math.pi, ly=2 * math.pi,
                 lz=None, backend="default"):
        if (nz is None) != (lz is None):
            raise ValueError("provide both nz and lz for a 3D operator")
        if nz is None:
            dims, lengths = (ny, nx), (ly, lx)
        else:
            dims, lengths = (nz, ny, nx), (lz, ly, lx)
        self.backend_id = resolve_backend(backend)
        self.plan = create_plan(self.backend_id, GridSpec(dims, lengths))
        self._og = build_operator_grid(self.plan)
        self.shapeX = self.plan.shapeX
        self.shapeK = self.plan.shapeK
        self.XX = _readonly(self._og.XX)
        self.YY = _readonly(self._og.YY)
        self.ZZ = None if self._og.ZZ is None else _readonly(self._og.ZZ)
        self.KX = _readonly(self._og.KX)
        self.KY = _readonly(self._og.KY)
        self.KZ = None if self._og.KZ is None else _readonly(self._og.KZ)

    @property
    def ndim(self):
        return len(self.shapeX)

    def _as_real(self, values, name="u"):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != self.shapeX:
            raise ShapeError(
                f"{name} has shape {values.shape}, expected {self.shapeX}"
            )
        return RealField(self.plan.grid, values)

    def _as_spectral(self, values, name="u_fft"):
        values = np.ascontiguousarray(values, dtype=np.complex128)
        if values.shape != self.shapeK:
            raise ShapeError(
                f"{name} has shape {values.shape}, expected {self.shapeK}"
            )
        return SpectralField(self.plan.grid, values)

    def fft(self, u):
        """Forward transform of a physical array; returns the half spectrum."""
        return unifft.fft_alloc(self.plan, self._as_real(u)).data

    def ifft(self, u_fft):
        """Inverse transform of a half spectrum; returns the physical array."""
        return unifft.ifft_alloc(self.plan, self._as_spectral(u_fft)).data

    def gradfft_from_fft(self, u_fft):
        """Spectral gradient components (x, y[, z]) of a transformed field."""
        components = _core_gradfft(self._og, self._as_spectral(u_fft).data)
        return tuple(np.asarray(c) for c in components)

    def project_divergence_free(self, vx_fft, vy_fft, vz_fft=None):
        """Divergence-free projection of a spectral velocity field."""
        names = ("vx_fft", "vy_fft", "vz_fft")
        given = (vx_fft, vy_fft) if vz_fft is None else (vx_fft, vy_fft, vz_fft)
        if len(given) != self.ndim:
            raise ShapeError(
                f"expected {self.ndim} velocity components, got {len(given)}"
            )
        arrays = tuple(
            self._as_spectral(v, name).data for v, name in zip(given, names)
        )
        return tuple(np.asarray(c) for c in _core_proj(self._og, arrays))


def create_operator(nx, ny, nz=None, lx=2 * math.pi, ly=2 * math.pi, lz=None,
                    backend="default"):
    """Create a BoundOperator; backend "default" picks the fastest available."""
    return BoundOperator(nx, ny, nz=nz, lx=lx, ly=ly, lz=lz, backend=backend)
