import numpy as np
import pytest

from ffcc.bvm import DegenerateConcentrationError
from ffcc.chroma import (
    HistogramGeometry,
    HistogramStack,
    build_stack,
    compute_uv,
    linear_image,
)
from ffcc.model import (
    ModelParams,
    dealias_gray_light,
    dealias_gray_world,
    estimate,
    forward,
    illuminant_rgb,
    softmax2d,
    zero_params,
)

GEOM = HistogramGeometry(n=16, h=0.125, u_lo=-1.0, v_lo=-1.0)


def delta_stack(geom, i, j):
    channels = np.zeros((2, geom.n, geom.n))
    channels[0, i, j] = 1.0
    return HistogramStack(geometry=geom, channels=channels)


def test_softmax_constant_grid_is_uniform():
    P = softmax2d(np.full((8, 8), 3.7))
    assert np.allclose(P, 1.0 / 64.0, atol=1e-15)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((8, 8))
    assert np.allclose(softmax2d(Z), softmax2d(Z + 11.3), atol=1e-12)


def test_softmax_two_bin_closed_form():
    Z = np.full((4, 4), -1e4)
    Z[0, 0] = np.log(3.0)
    Z[2, 3] = np.log(1.0)
    P = softmax2d(Z)
    assert abs(P[0, 0] - 0.75) < 1e-9
    assert abs(P[2, 3] - 0.25) < 1e-9


def test_forward_zero_model_is_uniform():
    params = zero_params(GEOM)
    pdf = forward(delta_stack(GEOM, 5, 7), params)
    assert np.allclose(pdf.p, 1.0 / GEOM.n**2, atol=1e-15)


def test_forward_bias_saturation():
    params = zero_params(GEOM)
    bias = np.zeros((GEOM.n, GEOM.n))
    bias[3, 4] = 50.0
    params = ModelParams(
        geometry=GEOM, filters=params.filters, gain_log=params.gain_log, bias=bias
    )
    pdf = forward(delta_stack(GEOM, 5, 7), params)
    assert pdf.p[3, 4] > 1.0 - 1e-9


def test_forward_identity_filter_localizes_histogram():
    filters = np.zeros((2, GEOM.n, GEOM.n))
    filters[0, 0, 0] = 25.0  # delta kernel at the origin: identity convolution
    params = ModelParams(
        geometry=GEOM,
        filters=filters,
        gain_log=np.zeros((GEOM.n, GEOM.n)),
        bias=np.zeros((GEOM.n, GEOM.n)),
    )
    pdf = forward(delta_stack(GEOM, 5, 7), params)
    assert np.unravel_index(np.argmax(pdf.p), pdf.p.shape) == (5, 7)
    assert abs(pdf.p.sum() - 1.0) < 1e-12


def test_forward_geometry_mismatch_rejected():
    params = zero_params(GEOM)
    other = HistogramGeometry(n=8, h=0.25)
    with pytest.raises(ValueError):
        forward(delta_stack(other, 0, 0), params)


def test_dealias_gray_light_is_identity():
    mu = np.array([0.37, -0.9])
    assert np.array_equal(dealias_gray_light(mu, GEOM), mu)


def test_dealias_gray_world_zero_offset():
    mu = np.array([0.1, 0.2])
    out = dealias_gray_world(mu, mu, GEOM)
    assert np.allclose(out, mu, atol=1e-15)


def test_dealias_gray_world_period_boundary():
    period = GEOM.period
    anchor = np.array([0.05, -0.1])
    mu = anchor + period  # exactly one period away: floor(1.5) = 1
    out = dealias_gray_world(mu, anchor, GEOM)
    assert np.allclose(out, anchor, atol=1e-12)


def test_dealias_gray_world_always_near_anchor():
    rng = np.random.default_rng(1)
    period = GEOM.period
    for _ in range(200):
        mu = rng.uniform(-10, 10, size=2)
        anchor = rng.uniform(-10, 10, size=2)
        out = dealias_gray_world(mu, anchor, GEOM)
        assert np.all(np.abs(out - anchor) <= period / 2 + 1e-12)
        # the output is an aliased copy of the input
        cycles = (out - mu) / period
        assert np.allclose(cycles, np.round(cycles), atol=1e-9)


def test_illuminant_rgb_neutral():
    rgb = illuminant_rgb((0.0, 0.0))
    assert np.allclose(rgb, 1.0 / np.sqrt(3.0), atol=1e-12)


def test_illuminant_rgb_direct_case():
    rgb = illuminant_rgb((np.log(2.0), 0.0))
    assert np.allclose(rgb, [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0], atol=1e-12)


def test_illuminant_rgb_roundtrip():
    rng = np.random.default_rng(2)
    for _ in range(50):
        L = rng.uniform(-1.5, 1.5, size=2)
        u, v = compute_uv(illuminant_rgb(L))
        assert abs(u - L[0]) < 1e-12 and abs(v - L[1]) < 1e-12
    assert np.linalg.norm(illuminant_rgb((0.4, -0.7))) == pytest.approx(1.0, abs=1e-9)


def test_estimate_zero_model_degenerate():
    rng = np.random.default_rng(3)
    img = linear_image(rng.uniform(0.1, 0.6, size=(8, 8, 3)))
    with pytest.raises(DegenerateConcentrationError):
        estimate(img, zero_params(GEOM))


def test_estimate_deterministic():
    rng = np.random.default_rng(4)
    img = linear_image(rng.uniform(0.1, 0.6, size=(10, 10, 3)))
    filters = rng.standard_normal((2, GEOM.n, GEOM.n))
    params = ModelParams(
        geometry=GEOM,
        filters=filters,
        gain_log=0.1 * rng.standard_normal((GEOM.n, GEOM.n)),
        bias=rng.standard_normal((GEOM.n, GEOM.n)),
    )
    a = estimate(img, params)
    b = estimate(img, params)
    assert np.array_equal(a.rgb, b.rgb)
    assert np.array_equal(a.posterior.mu, b.posterior.mu)
    assert np.array_equal(a.posterior.sigma, b.posterior.sigma)
    assert a.entropy == b.entropy


def test_estimate_rejects_unknown_mode():
    rng = np.random.default_rng(5)
    img = linear_image(rng.uniform(0.1, 0.6, size=(4, 4, 3)))
    with pytest.raises(ValueError):
        estimate(img, zero_params(GEOM), dealias_mode="nearest")


def test_tint_equivariance_of_convolution_path():
    # with G_log = 0 and B = 0 the model is pure convolution, so a tint that
    # shifts the histograms by whole bins shifts the response the same way
    geom = HistogramGeometry(n=16, h=0.125, u_lo=-1.0, v_lo=-1.0)
    rng = np.random.default_rng(6)
    base = rng.uniform(0.1, 0.4, size=(12, 12, 3))
    filters = rng.standard_normal((2, geom.n, geom.n))
    params = ModelParams(
        geometry=geom,
        filters=filters,
        gain_log=np.zeros((geom.n, geom.n)),
        bias=np.zeros((geom.n, geom.n)),
    )
    p0 = forward(build_stack(linear_image(base), geom), params)
    du, dv = 2, 5
    tint = np.array([np.exp(-du * geom.h), 1.0, np.exp(-dv * geom.h)])
    p1 = forward(build_stack(linear_image(base * tint), geom), params)
    assert np.allclose(p1.p, np.roll(p0.p, (du, dv), axis=(0, 1)), atol=1e-9)
