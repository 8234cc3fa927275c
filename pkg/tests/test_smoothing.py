import numpy as np
import pytest

from ffcc.bvm import BvmPosterior
from ffcc.smoothing import SmootherState, init_state, smooth_update


def random_pd(rng, scale=1.0):
    A = rng.standard_normal((2, 2))
    return scale * (A @ A.T + 0.3 * np.eye(2))


def posterior(mu, sigma):
    return BvmPosterior(mu=np.asarray(mu, dtype=float), sigma=np.asarray(sigma, dtype=float))


def test_init_state_copies_observation():
    obs = posterior([0.1, -0.2], [[0.5, 0.1], [0.1, 0.4]])
    st = init_state(obs, alpha=0.03)
    assert np.array_equal(st.mu, obs.mu)
    assert np.array_equal(st.sigma, obs.sigma)
    assert st.alpha == 0.03


def test_init_state_rejects_bad_inputs():
    with pytest.raises(ValueError):
        init_state(posterior([0, 0], [[1, 2], [2, 1]]), alpha=0.0)
    with pytest.raises(ValueError):
        init_state(posterior([0, 0], np.eye(2)), alpha=-1.0)


def test_update_determinant_shrinks_with_zero_alpha():
    obs = posterior([0.1, -0.2], [[0.5, 0.1], [0.1, 0.4]])
    st = init_state(obs, alpha=0.0)
    st2 = smooth_update(st, obs)
    assert np.linalg.det(st2.sigma) < np.linalg.det(obs.sigma)
    assert st2.alpha == st.alpha


def test_huge_observation_covariance_is_ignored():
    st = SmootherState(mu=np.array([0.2, 0.3]), sigma=0.1 * np.eye(2), alpha=0.01)
    obs = posterior([5.0, -5.0], 1e12 * np.eye(2))
    out = smooth_update(st, obs)
    assert np.max(np.abs(out.mu - st.mu)) <= 1e-9
    assert np.max(np.abs(out.sigma - (st.sigma + 0.01 * np.eye(2)))) <= 1e-9


def test_huge_prior_covariance_defers_to_observation():
    st = SmootherState(mu=np.array([5.0, -5.0]), sigma=1e12 * np.eye(2), alpha=0.0)
    obs = posterior([0.2, 0.3], 0.1 * np.eye(2))
    out = smooth_update(st, obs)
    assert np.max(np.abs(out.mu - obs.mu)) <= 1e-9
    assert np.max(np.abs(out.sigma - obs.sigma)) <= 1e-9


def test_precision_addition_closed_form():
    # k identical isotropic observations from a matching prior: sigma^2 I / (k + 1)
    var = 0.37
    obs = posterior([0.4, -0.1], var * np.eye(2))
    st = init_state(obs, alpha=0.0)
    for k in range(1, 6):
        st = smooth_update(st, obs)
        assert np.max(np.abs(st.sigma - var / (k + 1) * np.eye(2))) <= 1e-9
        assert np.max(np.abs(st.mu - obs.mu)) <= 1e-12


def test_fixed_point_mean():
    rng = np.random.default_rng(0)
    st = SmootherState(mu=np.array([0.2, -0.4]), sigma=random_pd(rng), alpha=0.05)
    obs = posterior(st.mu, random_pd(rng))
    out = smooth_update(st, obs)
    assert np.max(np.abs(out.mu - st.mu)) <= 1e-12


def test_loewner_monotonicity_random():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        alpha = float(rng.uniform(0.0, 0.5))
        st = SmootherState(
            mu=rng.standard_normal(2), sigma=random_pd(rng, scale=rng.uniform(0.1, 5)), alpha=alpha
        )
        obs = posterior(rng.standard_normal(2), random_pd(rng, scale=rng.uniform(0.1, 5)))
        out = smooth_update(st, obs)
        pred = st.sigma + alpha * np.eye(2)
        eigs = np.linalg.eigvalsh(pred - out.sigma)
        assert np.min(eigs) >= -1e-12
        # output stays symmetric positive-definite
        assert np.allclose(out.sigma, out.sigma.T)
        assert np.min(np.linalg.eigvalsh(out.sigma)) > 0


def test_mean_is_precision_weighted_combination():
    rng = np.random.default_rng(2)
    for _ in range(100):
        st = SmootherState(mu=rng.standard_normal(2), sigma=random_pd(rng), alpha=0.1)
        obs = posterior(rng.standard_normal(2), random_pd(rng))
        out = smooth_update(st, obs)
        # direct 2x2 solve oracle
        pred = st.sigma + st.alpha * np.eye(2)
        A = np.linalg.inv(pred) + np.linalg.inv(obs.sigma)
        b = np.linalg.inv(pred) @ st.mu + np.linalg.inv(obs.sigma) @ obs.mu
        want = np.linalg.solve(A, b)
        assert np.max(np.abs(out.mu - want)) <= 1e-9


def test_alpha_zero_constant_observations_contract():
    obs_sigma = np.array([[0.2, 0.05], [0.05, 0.3]])
    obs = posterior([1.0, 2.0], obs_sigma)
    st = init_state(obs, alpha=0.0)
    prev_det = np.linalg.det(st.sigma)
    for _ in range(20):
        st = smooth_update(st, obs)
        det = np.linalg.det(st.sigma)
        assert det < prev_det
        prev_det = det
    assert np.max(np.abs(st.sigma)) < 0.02


def test_large_alpha_tracks_observations_quickly():
    st = SmootherState(mu=np.zeros(2), sigma=0.01 * np.eye(2), alpha=100.0)
    obs = posterior([3.0, -2.0], 0.01 * np.eye(2))
    out = smooth_update(st, obs)
    assert np.max(np.abs(out.mu - obs.mu)) < 0.01


def test_period_remap_pulls_observation_to_nearest_copy():
    st = SmootherState(mu=np.array([0.0, 0.0]), sigma=0.1 * np.eye(2), alpha=0.0)
    # observation one full period away is the same aliased illuminant
    obs = posterior([2.0, -2.0], 0.1 * np.eye(2))
    out = smooth_update(st, obs, period=2.0)
    assert np.max(np.abs(out.mu)) <= 1e-12


def test_non_pd_inputs_rejected():
    st = SmootherState(mu=np.zeros(2), sigma=np.eye(2), alpha=0.0)
    with pytest.raises(ValueError):
        smooth_update(st, posterior([0, 0], [[1.0, 2.0], [2.0, 1.0]]))
    bad = SmootherState(mu=np.zeros(2), sigma=np.array([[1.0, 2.0], [2.0, 1.0]]), alpha=0.0)
    with pytest.raises(ValueError):
        smooth_update(bad, posterior([0, 0], np.eye(2)))
