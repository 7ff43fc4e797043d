"""Sequential real-to-complex FFT backends, reference oracle and field helpers.

Transform convention used everywhere in the package:

* forward:  ``u_hat[k] = (1/N) * sum_x u(x) * exp(-i k.x)`` with ``N = prod(dims)``,
  so the zero mode equals the arithmetic mean of the input;
* inverse:  unnormalized synthesis ``u(x) = sum_k u_hat[k] * exp(+i k.x)`` with
  Hermitian completion of the stored half spectrum.

Spectra are stored row-major with the last axis halved to ``n//2 + 1``
(real-to-complex half-spectrum storage). All arithmetic is double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BackendUnavailable, InvalidGrid, ShapeError


def spectral_shape(dims):
    """Half-spectrum shape for a real array of shape ``dims``."""
    dims = tuple(dims)
    return dims[:-1] + (dims[-1] // 2 + 1,)


@dataclass(frozen=True)
class GridSpec:
    """Global grid: points per axis and physical domain extent per axis."""

    dims: tuple
    lengths: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        lengths = tuple(float(length) for length in self.lengths)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lengths", lengths)
        if len(dims) not in (2, 3):
            raise InvalidGrid(f"expected 2 or 3 axes, got {len(dims)}")
        if len(lengths) != len(dims):
            raise InvalidGrid("dims and lengths must have the same number of axes")
        if any(n < 2 for n in dims):
            raise InvalidGrid(f"every dim must be >= 2, got {dims}")
        if any(not (length > 0) for length in lengths):
            raise InvalidGrid(f"every length must be > 0, got {lengths}")

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def size(self):
        return math.prod(self.dims)

    @property
    def shapeK(self):
        return spectral_shape(self.dims)


@dataclass
class RealField:
    """Physical-space field: double-precision values on the full grid."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != self.grid.dims:
            raise ShapeError(
                f"real field shape {self.data.shape} != grid dims {self.grid.dims}"
            )

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.dims))

    @classmethod
    def from_array(cls, grid, values):
        values = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError("real field values must be finite")
        return cls(grid, values)


@dataclass
class SpectralField:
    """Half-spectrum field: complex values, last axis halved to n//2 + 1."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.shape != self.grid.shapeK:
            raise ShapeError(
                f"spectral field shape {self.data.shape} != half-spectrum shape "
                f"{self.grid.shapeK}"
            )

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shapeK, dtype=np.complex128))


# ---------------------------------------------------------------------------
# direct (non-FFT) transforms, also used as the validation oracle


def _dft_matrix(n, sign, rows=None):
    """Dense DFT matrix W[k, x] = exp(sign * 2i pi k x / n), optionally truncated."""
    k = np.arange(n if rows is None else rows)
    x = np.arange(n)
    return np.exp(sign * 2j * np.pi * np.outer(k, x) / n)


def _apply_matrix(arr, mat, axis):
    """Contract ``mat`` with ``arr`` along ``axis``, keeping the axis order."""
    moved = np.tensordot(mat, arr, axes=([1], [axis]))
    return np.moveaxis(moved, 0, axis)


def _hermitian_negate(arr):
    """Index map i -> (-i) mod n applied to every axis."""
    for ax in range(arr.ndim):
        arr = np.roll(np.flip(arr, ax), 1, ax)
    return arr


def hermitian_complete(half, dims):
    """Expand a half spectrum to the full complex spectrum of shape ``dims``."""
    dims = tuple(dims)
    n_last = dims[-1]
    nk = half.shape[-1]
    full = np.empty(dims, dtype=np.complex128)
    full[..., :nk] = half
    for j in range(nk, n_last):
        full[..., j] = np.conj(_hermitian_negate(np.array(half[..., n_last - j])))
    return full


def _direct_dft_r2c(values, dims):
    """Direct evaluation of the normalized forward transform (no FFT algorithm).

    Each axis is contracted with a dense complex-exponential matrix; the last
    axis keeps only the n//2 + 1 stored rows.
    """
    dims = tuple(dims)
    work = np.asarray(values, dtype=np.complex128)
    last = len(dims) - 1
    for ax, n in enumerate(dims):
        rows = n // 2 + 1 if ax == last else None
        work = _apply_matrix(work, _dft_matrix(n, -1, rows=rows), ax)
    return work / math.prod(dims)


def _direct_idft_c2r(half, dims):
    """Direct unnormalized synthesis from a half spectrum (no FFT algorithm)."""
    dims = tuple(dims)
    full = hermitian_complete(np.asarray(half, dtype=np.complex128), dims)
    for ax, n in enumerate(dims):
        full = _apply_matrix(full, _dft_matrix(n, +1), ax)
    return full.real


# ---------------------------------------------------------------------------
# backends


class _NaiveBackend:
    """Direct-summation backend, bitwise deterministic, O(N^2)-style."""

    name = "naive"

    def forward(self, values, dims):
        return _direct_dft_r2c(values, dims)

    def inverse(self, half, dims):
        return _direct_idft_c2r(half, dims)


class _FastBackend:
    """numpy.fft (pocketfft) backend rescaled to the package convention."""

    name = "fast"

    def forward(self, values, dims):
        return np.fft.rfftn(values) / math.prod(dims)

    def inverse(self, half, dims):
        axes = tuple(range(len(dims)))
        return np.fft.irfftn(half, s=dims, axes=axes) * math.prod(dims)


BACKENDS = {
    "naive": _NaiveBackend(),
    "fast": _FastBackend(),
}


def available_backends():
    """Registered backend identifiers, sorted."""
    return sorted(BACKENDS)


def get_backend(backend_id):
    try:
        return BACKENDS[backend_id]
    except KeyError:
        raise BackendUnavailable(backend_id, available_backends()) from None


# ---------------------------------------------------------------------------
# plans and transform entry points


@dataclass(frozen=True)
class FftPlan:
    """Prepared sequential transform for one backend and one grid."""

    backend_id: str
    grid: GridSpec
    shapeX: tuple
    shapeK: tuple
    normalization: str = "forward-normalized"


def create_plan(backend_id, grid):
    """Prepare an immutable sequential transform plan."""
    backend = get_backend(backend_id)
    if not isinstance(grid, GridSpec):
        grid = GridSpec(*grid)
    return FftPlan(backend.name, grid, grid.dims, grid.shapeK)


def _check_real(plan, fld):
    if fld.data.shape != plan.shapeX:
        raise ShapeError(f"physical shape {fld.data.shape} != plan {plan.shapeX}")


def _check_spectral(plan, fld):
    if fld.data.shape != plan.shapeK:
        raise ShapeError(f"spectral shape {fld.data.shape} != plan {plan.shapeK}")


def fft_into(plan, input_field, output_field):
    """Forward transform into a preallocated spectral field."""
    _check_real(plan, input_field)
    _check_spectral(plan, output_field)
    backend = get_backend(plan.backend_id)
    np.copyto(output_field.data, backend.forward(input_field.data, plan.grid.dims))


def fft_alloc(plan, input_field):
    """Forward transform returning a freshly allocated spectral field."""
    _check_real(plan, input_field)
    backend = get_backend(plan.backend_id)
    return SpectralField(plan.grid, backend.forward(input_field.data, plan.grid.dims))


def ifft_into(plan, input_field, output_field):
    """Inverse transform into a preallocated real field."""
    _check_spectral(plan, input_field)
    _check_real(plan, output_field)
    backend = get_backend(plan.backend_id)
    np.copyto(output_field.data, backend.inverse(input_field.data, plan.grid.dims))


def ifft_alloc(plan, input_field):
    """Inverse transform returning a freshly allocated real field."""
    _check_spectral(plan, input_field)
    backend = get_backend(plan.backend_id)
    return RealField(plan.grid, backend.inverse(input_field.data, plan.grid.dims))


def naive_dft_r2c(grid, input_field):
    """Independent direct-summation oracle for the forward transform."""
    if input_field.data.shape != grid.dims:
        raise ShapeError(
            f"input shape {input_field.data.shape} != grid dims {grid.dims}"
        )
    return SpectralField(grid, _direct_dft_r2c(input_field.data, grid.dims))


# ---------------------------------------------------------------------------
# helpers shared with the other modules


def init_random(grid, seed):
    """Deterministic random field, uniform in [-1, 1), PCG64 generator."""
    rng = np.random.default_rng(seed)
    return RealField(grid, rng.uniform(-1.0, 1.0, size=grid.dims))


def compute_mean(fld):
    """Arithmetic mean of all elements."""
    return float(np.mean(fld.data))


def compute_energy_X(fld):
    """Physical-space energy 0.5 * mean(u^2)."""
    return 0.5 * float(np.mean(fld.data**2))


def hermitian_weights(dims, nk_local=None, offset_last=0):
    """Per-last-axis-index weights: 1 for the self-conjugate columns, else 2.

    ``nk_local``/``offset_last`` select a slice of the stored last axis, for
    distributed blocks.
    """
    n_last = dims[-1]
    nk = spectral_shape(dims)[-1] if nk_local is None else nk_local
    idx = offset_last + np.arange(nk)
    weights = np.full(nk, 2.0)
    weights[idx == 0] = 1.0
    if n_last % 2 == 0:
        weights[idx == n_last // 2] = 1.0
    return weights


def compute_energy_K(fld):
    """Spectral energy 0.5 * sum(w_k |u_hat|^2) with Hermitian double-counting."""
    weights = hermitian_weights(fld.grid.dims)
    return 0.5 * float(np.sum(weights * np.abs(fld.data) ** 2))
