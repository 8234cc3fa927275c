"""Temporal fusion of per-frame illuminant posteriors.

Each update diffuses the running estimate by an isotropic transition
variance alpha, then multiplies in the observed Gaussian — the standard
precision-weighted product, so the posterior can only tighten relative to
the diffused prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bvm import BvmPosterior


@dataclass(frozen=True)
class SmootherState:
    """Running mean/covariance plus the per-frame transition variance."""

    mu: np.ndarray  # (2,)
    sigma: np.ndarray  # (2, 2)
    alpha: float


def _check_pd(sigma: np.ndarray, what: str) -> None:
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    if det <= 0.0 or sigma[0, 0] <= 0.0:
        raise ValueError(f"{what} covariance is not positive-definite")


def init_state(first_obs: BvmPosterior, alpha: float) -> SmootherState:
    """Start the stream at the first observation."""
    if alpha < 0.0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    _check_pd(first_obs.sigma, "observation")
    return SmootherState(
        mu=np.array(first_obs.mu, dtype=np.float64),
        sigma=np.array(first_obs.sigma, dtype=np.float64),
        alpha=float(alpha),
    )


def smooth_update(
    state: SmootherState,
    obs: BvmPosterior,
    period: float | None = None,
) -> SmootherState:
    """One fusion step: diffuse the prior by alpha, multiply in the observation.

    If ``period`` is given, the observed mean is first remapped to the
    aliased copy nearest the running mean, so a torus-wrapped observation
    cannot yank the estimate across the seam.
    """
    _check_pd(state.sigma, "state")
    _check_pd(obs.sigma, "observation")
    mu_o = np.array(obs.mu, dtype=np.float64)
    if period is not None and period > 0.0:
        mu_o = mu_o - period * np.floor((mu_o - state.mu) / period + 0.5)

    sigma_pred = state.sigma + state.alpha * np.eye(2)
    prec_pred = np.linalg.inv(sigma_pred)
    prec_obs = np.linalg.inv(obs.sigma)
    sigma_new = np.linalg.inv(prec_pred + prec_obs)
    sigma_new = 0.5 * (sigma_new + sigma_new.T)
    mu_new = sigma_new @ (prec_pred @ state.mu + prec_obs @ mu_o)
    return SmootherState(mu=mu_new, sigma=sigma_new, alpha=state.alpha)
