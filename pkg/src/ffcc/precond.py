"""Smoothness regularizer and its frequency-domain preconditioner.

The regularizer on a periodic grid Z is

    lambda1 * sum of squared forward differences (wrap-around, both axes)
    + lambda0 * sum of squared values

which is diagonal in the FFT basis.  ``build_weights`` bakes it into a
positive per-slot weight vector w so that the regularizer equals
``||w * fftv(Z)||^2`` exactly, and optimizing over z = w * fftv(Z) turns it
into plain L2 while rescaling the landscape (the preconditioning effect).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .torusfft import fftv, ifftv, slot_layout


@dataclass(frozen=True)
class RegWeights:
    """Per-slot regularizer weights in the fftv layout; strictly positive."""

    lambda0: float
    lambda1: float
    w: np.ndarray

    @property
    def n(self) -> int:
        return int(round(np.sqrt(self.w.size)))


def build_weights(n: int, lambda0: float, lambda1: float) -> RegWeights:
    """Weight vector w with ||w * fftv(Z)||^2 == regularizer_time_domain(Z).

    The per-bin weight is the regularizer's transfer function
    lambda1 * (|D_u|^2 + |D_v|^2) + lambda0, where D_u, D_v are the FFTs of
    the 2-tap wrap-around difference filters zero-padded to n x n.  The
    squared complex magnitude at bin (i, j) is applied to both the real and
    imaginary slot of that bin, which is what makes the identity exact.
    """
    if lambda0 <= 0:
        raise ValueError(f"lambda0 must be > 0, got {lambda0}")
    if lambda1 < 0:
        raise ValueError(f"lambda1 must be >= 0, got {lambda1}")
    d_u = np.zeros((n, n))
    d_u[0, 0] = 1.0
    d_u[1, 0] = -1.0
    d_v = np.zeros((n, n))
    d_v[0, 0] = 1.0
    d_v[0, 1] = -1.0
    gain = lambda1 * (np.abs(np.fft.fft2(d_u)) ** 2 + np.abs(np.fft.fft2(d_v)) ** 2)
    rows, cols, _, _ = slot_layout(n)
    w = np.sqrt(gain[rows, cols] + lambda0) / n
    return RegWeights(lambda0=float(lambda0), lambda1=float(lambda1), w=w)


def regularizer_time_domain(Z: np.ndarray, lambda0: float, lambda1: float) -> float:
    """Direct evaluation of the smoothness penalty on the grid itself."""
    Z = np.asarray(Z, dtype=np.float64)
    di = Z - np.roll(Z, -1, axis=0)
    dj = Z - np.roll(Z, -1, axis=1)
    return float(lambda1 * (np.sum(di**2) + np.sum(dj**2)) + lambda0 * np.sum(Z**2))


def to_preconditioned(Z: np.ndarray, weights: RegWeights) -> np.ndarray:
    """Map a grid into the rescaled FFT-vector space: z = w * fftv(Z)."""
    return weights.w * fftv(Z)


def from_preconditioned(z: np.ndarray, weights: RegWeights) -> np.ndarray:
    """Inverse map: Z = ifftv(z / w)."""
    z = np.asarray(z, dtype=np.float64)
    if z.size != weights.w.size:
        raise ValueError(f"size mismatch: {z.size} vs {weights.w.size}")
    return ifftv(z / weights.w)


def grad_to_preconditioned(dZ: np.ndarray, weights: RegWeights) -> np.ndarray:
    """Pull a gradient w.r.t. the grid back to the preconditioned vector.

    For Z = ifftv(z / w) the chain rule gives
    dL/dz = (1 / w) * adjoint(ifftv)(dL/dZ) = (1 / w) * fftv(dL/dZ) / n^2.
    """
    return fftv(dZ) / (dZ.size * weights.w)
