import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccbounds.errors import DimensionError
from ccbounds.models import (
    ComplexSinusoidModel,
    LinearGaussianModel,
    as_complex,
    fim_monte_carlo,
    interleave,
)


def fd_grad(fun, theta, h=1e-6):
    g = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        g[j] = (fun(theta + e) - fun(theta - e)) / (2 * h)
    return g


def case2_H():
    return np.vstack([np.eye(3), [[0.9, 0.9, 0.6]]])


def test_interleave_roundtrip(rng):
    z = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    x = interleave(z)
    assert x.shape == (14,)
    np.testing.assert_array_equal(as_complex(x), z)
    zb = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    np.testing.assert_array_equal(as_complex(interleave(zb)), zb)


def test_linear_model_validation():
    with pytest.raises(ValueError):
        LinearGaussianModel(np.ones((2, 3)), 1.0)
    with pytest.raises(ValueError):
        LinearGaussianModel(np.eye(3), 0.0)
    with pytest.raises(ValueError):
        LinearGaussianModel(np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]]), 1.0)
    with pytest.raises(DimensionError):
        LinearGaussianModel(np.eye(3), 1.0).score(np.zeros(4), np.zeros(3))


def test_sinusoid_model_validation():
    with pytest.raises(ValueError):
        ComplexSinusoidModel(0, 1, 1.0)
    with pytest.raises(DimensionError):
        ComplexSinusoidModel(0, 4, 1.0).fim(np.zeros(2))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_linear_score_is_log_pdf_gradient(seed):
    rng = np.random.default_rng(seed)
    m = LinearGaussianModel(case2_H(), 2.5)
    theta = rng.standard_normal(3)
    x = m.sample(theta, rng)
    np.testing.assert_allclose(m.score(x, theta),
                               fd_grad(lambda t: m.log_pdf(x, t), theta), rtol=1e-6, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), l1=st.integers(-50, 50))
def test_sinusoid_score_is_log_pdf_gradient(seed, l1):
    rng = np.random.default_rng(seed)
    m = ComplexSinusoidModel(l1, 9, 3.0)
    theta = np.array([rng.normal(), rng.normal(), rng.uniform(-np.pi, np.pi)])
    x = m.sample(theta, rng)
    np.testing.assert_allclose(m.score(x, theta),
                               fd_grad(lambda t: m.log_pdf(x, t), theta), rtol=1e-5, atol=1e-5)


def test_sinusoid_log_pdf_is_normalized_gaussian():
    # independent check: product of real Gaussians with variance sigma2 / 2
    m = ComplexSinusoidModel(2, 5, 0.7)
    theta = np.array([0.3, -0.4, 1.1])
    x = interleave(m.signal(theta)) + 0.1
    r = x - interleave(m.signal(theta))
    ref = np.sum(-0.5 * r**2 / (0.35) - 0.5 * np.log(2 * np.pi * 0.35))
    assert m.log_pdf(x, theta) == pytest.approx(ref, rel=1e-12)


def test_sinusoid_fim_matches_signal_jacobian():
    # J = (2 / sigma2) Re{dmu^H dmu} for circular complex Gaussian noise
    m = ComplexSinusoidModel(-4, 11, 2.0)
    theta = np.array([0.6, -0.8, 0.4])
    h = 1e-6
    cols = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        cols.append((m.signal(theta + e) - m.signal(theta - e)) / (2 * h))
    G = np.array(cols).T
    J_ref = 2.0 / m.sigma2 * np.real(G.conj().T @ G)
    np.testing.assert_allclose(m.fim(theta), J_ref, rtol=1e-7, atol=1e-7)


def test_fim_symmetric_psd(rng):
    for m, theta in [(LinearGaussianModel(case2_H(), 16.0), rng.standard_normal(3)),
                     (ComplexSinusoidModel(1, 15, 16.0), np.array([0.1, 0.2, 2.0]))]:
        J = m.fim(theta)
        np.testing.assert_array_equal(J, J.T)
        assert np.linalg.eigvalsh(J).min() > 0


def test_stacked_fim_scales(rng):
    m = LinearGaussianModel(case2_H(), 16.0)
    np.testing.assert_allclose(m.stacked(7).fim(), 7 * m.fim(), rtol=1e-14)
    assert m.stacked(7).dim_obs == 28


def test_sinusoid_noise_variance(rng):
    m = ComplexSinusoidModel(0, 4, 2.0)
    theta = np.array([0.0, 0.0, 0.0])
    x = m.sample(theta, rng, size=200_000)
    var = x.var(axis=0)
    np.testing.assert_allclose(var, 1.0, rtol=0.02)


@pytest.mark.parametrize("which", ["linear", "sinusoid"])
def test_score_zero_mean_and_mc_fim(rng, which):
    if which == "linear":
        m, theta = LinearGaussianModel(case2_H(), 16.0), np.array([0.2, -0.5, 0.8])
    else:
        m, theta = ComplexSinusoidModel(1, 15, 16.0), np.array([0.1, 0.15, 0.9 * np.pi])
    x = m.sample(theta, rng, size=50_000)
    s = m.score(x, theta)
    se = s.std(axis=0, ddof=1) / np.sqrt(len(s))
    assert np.all(np.abs(s.mean(axis=0)) <= 4 * se)
    J_mc = fim_monte_carlo(m, theta, 50_000, rng)
    J = m.fim(theta)
    scale = np.sqrt(np.outer(np.diag(J), np.diag(J)))
    assert np.all(np.abs(J_mc - J) <= 0.05 * scale)


def test_batch_shapes(rng):
    m = ComplexSinusoidModel(1, 6, 1.0)
    theta = np.array([0.3, 0.4, 0.5])
    x = m.sample(theta, rng, size=5)
    assert x.shape == (5, 12)
    assert m.score(x, theta).shape == (5, 3)
    assert m.log_pdf(x, theta).shape == (5,)
    np.testing.assert_allclose(m.score(x, theta)[2], m.score(x[2], theta))
