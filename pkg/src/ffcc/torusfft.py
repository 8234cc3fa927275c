"""Real bijective FFT vectorization and periodic 2D convolution.

``fftv`` maps a real n x n grid to a real length-n^2 vector holding each
independent FFT coefficient exactly once; ``ifftv`` inverts it.  The slot
layout below is a file-format commitment: serialized preconditioned weights
depend on it, so it must never change between releases.

Slot layout (zero-indexed FFT bins F(i, j), n even):

    block 0:  Re F(0 .. n/2,    0)         n/2 + 1 entries
    block 1:  Re F(0 .. n/2,    n/2)       n/2 + 1 entries
    block 2:  Re F(0 .. n-1,    1 .. n/2-1)   n * (n/2 - 1) entries
    block 3:  Im F(1 .. n/2-1,  0)         n/2 - 1 entries
    block 4:  Im F(1 .. n/2-1,  n/2)       n/2 - 1 entries
    block 5:  Im F(0 .. n-1,    1 .. n/2-1)   n * (n/2 - 1) entries

Blocks 2 and 5 are stored column-major (all rows of column 1, then column 2,
...).  Every slot is scaled by sqrt(2) except the four self-conjugate bins
Re F(0,0), Re F(0,n/2), Re F(n/2,0), Re F(n/2,n/2), which makes the map
norm-preserving: ||fftv(Z)||^2 equals the summed squared magnitude of the
complex 2D FFT of Z.
"""

from __future__ import annotations

import numpy as np

_SQRT2 = np.sqrt(2.0)

# Per-n cache of (rows, cols, scale) index arrays describing the slot layout.
_LAYOUT_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}


def _check_even(n: int) -> None:
    if n < 2 or n % 2 != 0:
        raise ValueError(f"grid side must be even and >= 2, got {n}")


def slot_layout(n: int):
    """Index arrays describing the fftv slot layout for side length n.

    Returns (rows, cols, is_imag, scale), each of length n^2: slot s holds
    scale[s] * Re/Im(F(rows[s], cols[s])) with Im selected where is_imag.
    """
    _check_even(n)
    cached = _LAYOUT_CACHE.get(n)
    if cached is not None:
        return cached

    half = n // 2
    rows, cols, imag = [], [], []

    def block(r, c, is_im):
        rr, cc = np.meshgrid(r, c, indexing="ij")
        # column-major within the block: iterate columns outer, rows inner
        rows.append(rr.T.ravel())
        cols.append(cc.T.ravel())
        imag.append(np.full(rr.size, is_im, dtype=bool))

    block(np.arange(half + 1), np.array([0]), False)
    block(np.arange(half + 1), np.array([half]), False)
    block(np.arange(n), np.arange(1, half), False)
    block(np.arange(1, half), np.array([0]), True)
    block(np.arange(1, half), np.array([half]), True)
    block(np.arange(n), np.arange(1, half), True)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    imag = np.concatenate(imag)
    if rows.size != n * n:
        raise AssertionError("slot layout does not cover n^2 coefficients")

    # sqrt(2) everywhere except the four self-conjugate bins
    self_conj = ((rows == 0) | (rows == half)) & ((cols == 0) | (cols == half))
    scale = np.where(self_conj & ~imag, 1.0, _SQRT2)

    layout = (rows, cols, imag, scale)
    _LAYOUT_CACHE[n] = layout
    return layout


def fftv(Z: np.ndarray) -> np.ndarray:
    """Vectorize a real n x n grid into its length-n^2 real FFT vector."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValueError(f"expected a square 2D grid, got shape {Z.shape}")
    n = Z.shape[0]
    rows, cols, imag, scale = slot_layout(n)
    F = np.fft.fft2(Z)
    vals = np.where(imag, F.imag[rows, cols], F.real[rows, cols])
    return scale * vals


def ifftv(v: np.ndarray) -> np.ndarray:
    """Invert ``fftv``: rebuild the Hermitian spectrum and inverse-transform."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a 1D vector")
    n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    _check_even(n)
    rows, cols, imag, scale = slot_layout(n)

    vals = v / scale
    F = np.zeros((n, n), dtype=np.complex128)
    re = ~imag
    F[rows[re], cols[re]] += vals[re]
    F[rows[imag], cols[imag]] += 1j * vals[imag]
    # fill the redundant half by Hermitian symmetry F(-i, -j) = conj F(i, j)
    filled = np.zeros((n, n), dtype=bool)
    filled[rows, cols] = True
    mi, mj = np.nonzero(~filled)
    F[mi, mj] = np.conj(F[(-mi) % n, (-mj) % n])
    return np.fft.ifft2(F).real


def fftv_adjoint(g: np.ndarray) -> np.ndarray:
    """Adjoint of ``fftv`` as a linear map (equals n^2 * ifftv)."""
    return ifftv(g) * g.size


def ifftv_adjoint(G: np.ndarray) -> np.ndarray:
    """Adjoint of ``ifftv`` as a linear map (equals fftv / n^2)."""
    return fftv(G) / G.size


def circular_convolve(N: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Periodic (toroidal) 2D convolution of two same-sized real grids."""
    N = np.asarray(N, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if N.shape != F.shape:
        raise ValueError(f"size mismatch: {N.shape} vs {F.shape}")
    if N.ndim != 2 or N.shape[0] != N.shape[1]:
        raise ValueError(f"expected square 2D grids, got shape {N.shape}")
    return np.fft.ifft2(np.fft.fft2(N) * np.fft.fft2(F)).real
