"""Inference pipeline: filter the histogram stack, fit the posterior,
de-alias, and recover the illuminant RGB.

The model is a stack of learned toroidal filters plus a per-bin gain/bias
map.  The gain is stored as a log so the effective gain stays positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bvm
from .chroma import HistogramGeometry, HistogramStack, LinearImage, build_stack, mean_uv

DEALIAS_MODES = ("gray-light", "gray-world")


@dataclass(frozen=True)
class ModelParams:
    """Learned grids: K filters, a log-gain map, and a bias map."""

    geometry: HistogramGeometry
    filters: np.ndarray = field(repr=False)  # (K, n, n)
    gain_log: np.ndarray = field(repr=False)  # (n, n)
    bias: np.ndarray = field(repr=False)  # (n, n)

    def __post_init__(self):
        n = self.geometry.n
        if self.filters.ndim != 3 or self.filters.shape[1:] != (n, n):
            raise ValueError("filters must be (K, n, n) matching the geometry")
        if self.gain_log.shape != (n, n) or self.bias.shape != (n, n):
            raise ValueError("gain_log and bias must be (n, n)")

    @property
    def num_channels(self) -> int:
        return self.filters.shape[0]


def zero_params(geometry: HistogramGeometry, num_channels: int = 2) -> ModelParams:
    n = geometry.n
    return ModelParams(
        geometry=geometry,
        filters=np.zeros((num_channels, n, n)),
        gain_log=np.zeros((n, n)),
        bias=np.zeros((n, n)),
    )


@dataclass(frozen=True)
class IlluminantEstimate:
    """De-aliased posterior, unit-norm illuminant RGB, and entropy proxy."""

    posterior: bvm.BvmPosterior
    rgb: np.ndarray  # (3,) unit norm
    entropy: float


def softmax2d(Z: np.ndarray) -> np.ndarray:
    """Softmax over all bins of a grid, stabilized by max subtraction."""
    Z = np.asarray(Z, dtype=np.float64)
    e = np.exp(Z - Z.max())
    return e / e.sum()


def filtered_logits(stack: HistogramStack, params: ModelParams) -> np.ndarray:
    """Pre-softmax response: bias + gain * summed filtered channels."""
    if stack.geometry.n != params.geometry.n:
        raise ValueError("stack and model geometries do not match")
    if stack.channels.shape[0] != params.num_channels:
        raise ValueError(
            f"stack has {stack.channels.shape[0]} channels, "
            f"model expects {params.num_channels}"
        )
    conv = np.fft.ifft2(
        np.sum(np.fft.fft2(stack.channels) * np.fft.fft2(params.filters), axis=0)
    ).real
    return params.bias + np.exp(params.gain_log) * conv


def forward(stack: HistogramStack, params: ModelParams) -> bvm.TorusPdf:
    """Full forward pass from a histogram stack to a toroidal PDF."""
    return bvm.TorusPdf(p=softmax2d(filtered_logits(stack, params)), geometry=params.geometry)


def dealias_gray_light(mu_aliased: np.ndarray, geom: HistogramGeometry) -> np.ndarray:
    """Trust the histogram placement: the aliased mean is the estimate."""
    return np.asarray(mu_aliased, dtype=np.float64)


def dealias_gray_world(mu_aliased, img_mean_uv, geom: HistogramGeometry) -> np.ndarray:
    """Pick the aliased copy nearest the image's mean chroma."""
    mu = np.asarray(mu_aliased, dtype=np.float64)
    anchor = np.asarray(img_mean_uv, dtype=np.float64)
    period = geom.period
    return mu - period * np.floor((mu - anchor) / period + 0.5)


def illuminant_rgb(L_uv) -> np.ndarray:
    """Unit-norm illuminant RGB implied by its log-chroma coordinates."""
    L_u, L_v = float(L_uv[0]), float(L_uv[1])
    vec = np.array([np.exp(-L_u), 1.0, np.exp(-L_v)])
    return vec / np.linalg.norm(vec)


def estimate(
    img: LinearImage,
    params: ModelParams,
    dealias_mode: str = "gray-light",
) -> IlluminantEstimate:
    """Histogram stack -> filtered PDF -> BVM fit -> de-alias -> RGB."""
    if dealias_mode not in DEALIAS_MODES:
        raise ValueError(f"unknown de-alias mode {dealias_mode!r}")
    stack = build_stack(img, params.geometry)
    pdf = forward(stack, params)
    posterior = bvm.fit(pdf)
    if dealias_mode == "gray-world":
        mu = dealias_gray_world(posterior.mu, mean_uv(img), params.geometry)
    else:
        mu = dealias_gray_light(posterior.mu, params.geometry)
    posterior = bvm.BvmPosterior(mu=mu, sigma=posterior.sigma)
    det = float(np.linalg.det(posterior.sigma))
    return IlluminantEstimate(
        posterior=posterior,
        rgb=illuminant_rgb(mu),
        entropy=0.5 * np.log(det),
    )
