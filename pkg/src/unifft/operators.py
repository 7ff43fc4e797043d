"""Pseudo-spectral operator layer: wavenumber grids, gradient, divergence,
divergence-free projection and shell-summed energy spectra.

Works identically over sequential plans (global arrays) and distributed plans
(local slices of the global wavenumber grids).
"""

from __future__ import annotations

import math

import numpy as np

from .decomp import DistPlan
from .errors import ShapeError
from .fft_core import SpectralField, hermitian_weights, spectral_shape


def _signed_frequencies(n):
    """FFT-order integer frequencies with the Nyquist mode positive: (-n/2, n/2]."""
    idx = np.arange(n)
    return np.where(idx <= n // 2, idx, idx - n).astype(np.float64)


class OperatorGrid:
    """Wavenumber and coordinate arrays for one plan.

    Attributes KX/KY[/KZ] hold the wavenumber along the last/.../first axis
    (x varies fastest), shaped like the plan's local spectral block; XX/YY[/ZZ]
    are the matching physical coordinates x_j = j * L / n. ``K2`` is |k|^2 and
    ``inv_k_square_nozero`` is 1/K2 with the zero mode set to 0.

    Immutable after construction apart from two lazily allocated complex
    scratch buffers reused by the in-place projection.
    """

    def __init__(self, plan):
        self.plan = plan
        self.grid = plan.grid
        dims = self.grid.dims
        lengths = self.grid.lengths
        ndim = len(dims)
        if isinstance(plan, DistPlan):
            self.context = plan.context
            dec = plan.decomposition
            self.shapeX_loc = tuple(dec.shapeX_loc)
            self.offsetX_loc = tuple(dec.offsetX_loc)
            self.shapeK_loc = tuple(dec.shapeK_loc)
            self.offsetK_loc = tuple(dec.offsetK_loc)
        else:
            self.context = None
            self.shapeX_loc = tuple(dims)
            self.offsetX_loc = (0,) * ndim
            self.shapeK_loc = spectral_shape(dims)
            self.offsetK_loc = (0,) * ndim

        k_vectors = []
        for ax, (n, length) in enumerate(zip(dims, lengths)):
            deltak = 2.0 * np.pi / length
            if ax == ndim - 1:
                freqs = np.arange(n // 2 + 1, dtype=np.float64)
            else:
                freqs = _signed_frequencies(n)
            lo = self.offsetK_loc[ax]
            k_vectors.append(deltak * freqs[lo : lo + self.shapeK_loc[ax]])
        k_mesh = np.meshgrid(*k_vectors, indexing="ij") if ndim > 0 else []

        x_vectors = []
        for ax, (n, length) in enumerate(zip(dims, lengths)):
            coords = np.arange(n, dtype=np.float64) * (length / n)
            lo = self.offsetX_loc[ax]
            x_vectors.append(coords[lo : lo + self.shapeX_loc[ax]])
        x_mesh = np.meshgrid(*x_vectors, indexing="ij")

        if ndim == 2:
            self.KY, self.KX = k_mesh
            self.KZ = None
            self.YY, self.XX = x_mesh
            self.ZZ = None
        else:
            self.KZ, self.KY, self.KX = k_mesh
            self.ZZ, self.YY, self.XX = x_mesh

        self.K2 = sum(k**2 for k in k_mesh)
        inv = np.zeros_like(self.K2)
        nonzero = self.K2 > 0
        inv[nonzero] = 1.0 / self.K2[nonzero]
        self.inv_k_square_nozero = inv
        self._scratch = None

    @property
    def k_axes(self):
        """Wavenumber arrays ordered by array axis: (KZ,) KY, KX."""
        if self.KZ is None:
            return (self.KY, self.KX)
        return (self.KZ, self.KY, self.KX)

    def _scratch_pair(self):
        # one pair of full-size complex buffers, allocated once and reused,
        # so steady-state in-place projections allocate nothing
        if self._scratch is None:
            self._scratch = (
                np.empty(self.shapeK_loc, dtype=np.complex128),
                np.empty(self.shapeK_loc, dtype=np.complex128),
            )
        return self._scratch


def build_operator_grid(plan):
    """Construct the operator grid for a sequential or distributed plan."""
    return OperatorGrid(plan)


def _spectral_array(og, value):
    arr = value.data if isinstance(value, SpectralField) else np.asarray(value)
    if arr.shape != og.shapeK_loc:
        raise ShapeError(f"spectral shape {arr.shape} != {og.shapeK_loc}")
    return arr


def _wrap_like(template, og, arr):
    if isinstance(template, SpectralField):
        return SpectralField(og.grid, arr)
    return arr


def gradfft_from_fft(og, u_fft):
    """Spectral gradient: component along axis a is i * K_a * u_hat.

    Returned in (x, y[, z]) order, matching (KX, KY[, KZ]).
    """
    arr = _spectral_array(og, u_fft)
    components = [1j * og.KX * arr, 1j * og.KY * arr]
    if og.KZ is not None:
        components.append(1j * og.KZ * arr)
    return tuple(_wrap_like(u_fft, og, c) for c in components)


def divfft_from_vecfft(og, v_fft):
    """Spectral divergence i * (KX vx + KY vy [+ KZ vz]) of a vector field."""
    arrays = [_spectral_array(og, v) for v in v_fft]
    if len(arrays) != (2 if og.KZ is None else 3):
        raise ShapeError(f"expected {2 if og.KZ is None else 3} components")
    div = og.KX * arrays[0] + og.KY * arrays[1]
    if og.KZ is not None:
        div = div + og.KZ * arrays[2]
    return _wrap_like(v_fft[0], og, 1j * div)


def _k_components(og, ncomp):
    return (og.KX, og.KY, og.KZ)[:ncomp]


def proj_outplace(og, v_fft):
    """Divergence-free projection, allocating; inputs are left unmodified.

    tmp = (kx vx + ky vy [+ kz vz]) * inv_k_square_nozero and each component
    becomes v_a - k_a * tmp; the zero mode passes through unchanged.
    """
    arrays = [_spectral_array(og, v) for v in v_fft]
    if len(arrays) != (2 if og.KZ is None else 3):
        raise ShapeError(f"expected {2 if og.KZ is None else 3} components")
    ks = _k_components(og, len(arrays))
    tmp = sum(k * v for k, v in zip(ks, arrays)) * og.inv_k_square_nozero
    return tuple(
        _wrap_like(v_fft[i], og, arrays[i] - ks[i] * tmp)
        for i in range(len(arrays))
    )


def proj_inplace(og, v_fft):
    """Divergence-free projection writing the result into the input arrays.

    Scratch policy: two full-size complex buffers owned by the operator grid,
    allocated on first use and reused, so steady-state calls allocate nothing.
    """
    arrays = [_spectral_array(og, v) for v in v_fft]
    if len(arrays) != (2 if og.KZ is None else 3):
        raise ShapeError(f"expected {2 if og.KZ is None else 3} components")
    ks = _k_components(og, len(arrays))
    acc, tmp = og._scratch_pair()
    np.multiply(ks[0], arrays[0], out=acc)
    for k, v in zip(ks[1:], arrays[1:]):
        np.multiply(k, v, out=tmp)
        acc += tmp
    acc *= og.inv_k_square_nozero
    for k, v in zip(ks, arrays):
        np.multiply(k, acc, out=tmp)
        v -= tmp


def spectrum_shell(og, u_fft, dk=None):
    """Shell-summed energy spectrum: list of (k_center, E) per bin.

    Bin b collects 0.5 * w_k * |u_hat|^2 for |k| in [b*dk, (b+1)*dk), with the
    Hermitian half-spectrum weights; k_center = (b + 0.5) * dk. The bin sum
    equals the total spectral energy. For distributed plans the bins are
    reduced over all ranks (identical result on every rank).
    """
    arr = _spectral_array(og, u_fft)
    dims = og.grid.dims
    if dk is None:
        dk = min(2.0 * np.pi / length for length in og.grid.lengths)
    if not dk > 0:
        raise ValueError("dk must be > 0")

    weights = hermitian_weights(dims, nk_local=og.shapeK_loc[-1],
                                offset_last=og.offsetK_loc[-1])
    energy = 0.5 * weights * np.abs(arr) ** 2
    kmag = np.sqrt(og.K2)

    # fixed global bin count so every rank bins identically
    kmax_global = math.sqrt(sum(
        (2.0 * np.pi / length * (n // 2)) ** 2
        for n, length in zip(dims, og.grid.lengths)
    ))
    nbins = int(np.floor(kmax_global / dk)) + 1

    indices = np.minimum((kmag / dk).astype(np.int64), nbins - 1)
    bins = np.bincount(indices.ravel(), weights=energy.ravel(), minlength=nbins)
    if og.context is not None:
        bins = og.context.allreduce_sum(bins)
    return [((b + 0.5) * dk, float(bins[b])) for b in range(nbins)]
