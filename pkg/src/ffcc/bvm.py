"""Bivariate von Mises fitting on toroidal PDFs, with analytic gradients.

The mean is the circular mean of each marginal; the covariance is the sample
covariance after "unwrapping" bin coordinates so the torus seam sits as far
from the mean as possible.  Every step is differentiable, so the Gaussian
negative log-likelihood computed from the fit can be backpropagated onto the
input PDF for end-to-end training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chroma import HistogramGeometry

EPSILON_BINS = 1.0  # covariance floor, in squared-bin units
RESULTANT_TOL = 1e-12


class DegenerateConcentrationError(ValueError):
    """Raised when a PDF is too diffuse for a circular mean to exist."""


@dataclass(frozen=True)
class TorusPdf:
    """Non-negative n x n grid summing to 1 on the torus."""

    p: np.ndarray
    geometry: HistogramGeometry

    def __post_init__(self):
        n = self.geometry.n
        if self.p.shape != (n, n):
            raise ValueError(f"pdf shape {self.p.shape} does not match n={n}")


@dataclass(frozen=True)
class BvmPosterior:
    """Illuminant posterior: mean (u, v) and 2x2 covariance in chroma units."""

    mu: np.ndarray  # (2,)
    sigma: np.ndarray  # (2, 2) symmetric positive-definite


def _marginal_resultants(p: np.ndarray, n: int):
    theta = 2.0 * np.pi * np.arange(n) / n
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    p_i = p.sum(axis=1)
    p_j = p.sum(axis=0)
    return (
        (p_i, float(p_i @ cos_t), float(p_i @ sin_t)),
        (p_j, float(p_j @ cos_t), float(p_j @ sin_t)),
        sin_t,
        cos_t,
    )


def fit_mean(pdf: TorusPdf) -> np.ndarray:
    """Circular mean of the PDF, reported inside the primary chroma span."""
    geom = pdf.geometry
    n = geom.n
    (_, x_i, y_i), (_, x_j, y_j), _, _ = _marginal_resultants(pdf.p, n)
    if np.hypot(x_i, y_i) < RESULTANT_TOL or np.hypot(x_j, y_j) < RESULTANT_TOL:
        raise DegenerateConcentrationError(
            "marginal resultant is (near) zero; the PDF has no usable mean"
        )
    mu_u = geom.u_lo + geom.h * np.mod(n / (2 * np.pi) * np.arctan2(y_i, x_i), n)
    mu_v = geom.v_lo + geom.h * np.mod(n / (2 * np.pi) * np.arctan2(y_j, x_j), n)
    return np.array([mu_u, mu_v])


def _unwrapped_coords(mu: np.ndarray, geom: HistogramGeometry):
    n = geom.n
    idx = np.arange(n)
    i_bar = np.mod(idx - np.floor((mu[0] - geom.u_lo) / geom.h) + n // 2, n)
    j_bar = np.mod(idx - np.floor((mu[1] - geom.v_lo) / geom.h) + n // 2, n)
    return i_bar, j_bar


def fit_covariance(pdf: TorusPdf, mu: np.ndarray) -> np.ndarray:
    """Sample covariance of the unwrapped coordinates, floored on the diagonal."""
    geom = pdf.geometry
    h2 = geom.h**2
    i_bar, j_bar = _unwrapped_coords(mu, geom)
    p_i = pdf.p.sum(axis=1)
    p_j = pdf.p.sum(axis=0)
    e_i = float(p_i @ i_bar)
    e_j = float(p_j @ j_bar)
    var_i = float(p_i @ i_bar**2) - e_i**2
    var_j = float(p_j @ j_bar**2) - e_j**2
    cov_ij = float(i_bar @ pdf.p @ j_bar) - e_i * e_j
    return h2 * np.array(
        [[EPSILON_BINS + var_i, cov_ij], [cov_ij, EPSILON_BINS + var_j]]
    )


def fit(pdf: TorusPdf) -> BvmPosterior:
    """Mean and covariance in one call."""
    mu = fit_mean(pdf)
    return BvmPosterior(mu=mu, sigma=fit_covariance(pdf, mu))


def _inv_2x2(sigma: np.ndarray):
    a, b, d = sigma[0, 0], sigma[0, 1], sigma[1, 1]
    det = a * d - b * b
    if det <= 0.0 or a <= 0.0:
        raise ValueError("covariance is not positive-definite")
    inv = np.array([[d, -b], [-b, a]]) / det
    return inv, float(det)


def nll_loss(post: BvmPosterior, truth_uv) -> float:
    """Gaussian negative log-likelihood of the true chroma under the fit."""
    inv, det = _inv_2x2(post.sigma)
    delta = np.asarray(truth_uv, dtype=np.float64) - post.mu
    return float(np.log(det) + delta @ inv @ delta)


def nll_grad(post: BvmPosterior, truth_uv):
    """Analytic (d loss / d mu, d loss / d sigma) of ``nll_loss``."""
    inv, _ = _inv_2x2(post.sigma)
    delta = np.asarray(truth_uv, dtype=np.float64) - post.mu
    d_mu = -2.0 * inv @ delta
    si_delta = inv @ delta
    d_sigma = inv - np.outer(si_delta, si_delta)
    return d_mu, d_sigma


def loss_backward(pdf: TorusPdf, truth_uv) -> tuple[float, np.ndarray]:
    """NLL of the fitted posterior and its gradient w.r.t. every PDF entry.

    Chains the loss gradients through both the circular-mean and the
    unwrapped-covariance fits.  The unwrapping offset is integer-valued and
    treated as locally constant, as is the de-aliasing choice.
    """
    geom = pdf.geometry
    n = geom.n
    (p_i, x_i, y_i), (p_j, x_j, y_j), sin_t, cos_t = _marginal_resultants(pdf.p, n)
    if np.hypot(x_i, y_i) < RESULTANT_TOL or np.hypot(x_j, y_j) < RESULTANT_TOL:
        raise DegenerateConcentrationError(
            "marginal resultant is (near) zero; the PDF has no usable mean"
        )
    mu = np.array(
        [
            geom.u_lo + geom.h * np.mod(n / (2 * np.pi) * np.arctan2(y_i, x_i), n),
            geom.v_lo + geom.h * np.mod(n / (2 * np.pi) * np.arctan2(y_j, x_j), n),
        ]
    )
    sigma = fit_covariance(pdf, mu)
    post = BvmPosterior(mu=mu, sigma=sigma)
    loss = nll_loss(post, truth_uv)
    d_mu, d_sigma = nll_grad(post, truth_uv)

    scale = n * geom.h / (2.0 * np.pi)
    dmu_u_di = scale * (x_i * sin_t - y_i * cos_t) / (x_i**2 + y_i**2)
    dmu_v_dj = scale * (x_j * sin_t - y_j * cos_t) / (x_j**2 + y_j**2)

    i_bar, j_bar = _unwrapped_coords(mu, geom)
    e_i = float(p_i @ i_bar)
    e_j = float(p_j @ j_bar)
    h2 = geom.h**2
    dvar_i = h2 * i_bar * (i_bar - 2.0 * e_i)  # depends on i only
    dvar_j = h2 * j_bar * (j_bar - 2.0 * e_j)  # depends on j only
    dcov = h2 * (np.outer(i_bar - e_i, j_bar - e_j) - e_i * e_j)

    grad = (
        d_mu[0] * dmu_u_di[:, None]
        + d_mu[1] * dmu_v_dj[None, :]
        + d_sigma[0, 0] * dvar_i[:, None]
        + d_sigma[1, 1] * dvar_j[None, :]
        + 2.0 * d_sigma[0, 1] * dcov
    )
    return loss, grad
