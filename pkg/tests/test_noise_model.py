import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from igdts.noise_model import (
    NoiseParams,
    erfcx,
    gaussian_pdf,
    gl_pdf,
    lambda_from_noise,
    laplacian_pdf,
    sample_gl,
)
from oracles import convolve_gl, printed_gl_pdf

SIGMAS = [0.5, 1.0, 2.0]


def test_params_reject_nonpositive_scales():
    for bad in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            NoiseParams(sigma_g=bad, sigma_l=1.0)
        with pytest.raises(ValueError):
            NoiseParams(sigma_g=1.0, sigma_l=bad)


def test_gaussian_mode_value():
    assert gaussian_pdf(0.0, NoiseParams(1.0, 1.0)) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert gaussian_pdf(0.0, NoiseParams(1.0, 1.0)) == pytest.approx(0.3989423, abs=1e-7)


def test_gaussian_even_and_normalized():
    p = NoiseParams(0.7, 1.0)
    x = np.random.default_rng(0).normal(size=200) * 3
    np.testing.assert_array_equal(gaussian_pdf(x, p), gaussian_pdf(-x, p))
    total, _ = integrate.quad(lambda t: gaussian_pdf(t, p), -8 * p.sigma_g, 8 * p.sigma_g, epsabs=1e-13)
    assert abs(total - 1) < 1e-8


def test_laplacian_values():
    p = NoiseParams(1.0, 1.0)
    assert laplacian_pdf(0.0, p) == 0.5
    assert laplacian_pdf(1.0, p) == pytest.approx(0.5 * math.exp(-1), rel=1e-15)
    assert laplacian_pdf(1.0, p) == pytest.approx(0.1839397, abs=1e-7)


def test_laplacian_variance_monte_carlo():
    sl = 1.3
    draws = np.random.Generator(np.random.Philox(4)).laplace(0.0, sl, size=10**6)
    assert abs(draws.var() / (2 * sl**2) - 1) < 0.02


def test_erfcx_special_values():
    assert erfcx(0.0) == 1.0
    x = 0.5
    assert erfcx(-x) == pytest.approx(2 * math.exp(x * x) - erfcx(x), rel=1e-14)
    approx = 1 / (20 * math.sqrt(math.pi)) * (1 - 1 / (2 * 400))
    assert abs(erfcx(20.0) / approx - 1) < 1e-4


def test_erfcx_matches_quadrature():
    # erfcx(x) = 2/sqrt(pi) int_0^inf exp(-t^2 - 2 x t) dt, valid for every real x
    xs = np.concatenate([np.linspace(-10, 30, 81), [1.999, 2.0, 2.001, 25.999, 26.0, 26.001]])
    worst = 0.0
    for x in xs:
        ref, _ = integrate.quad(lambda t: math.exp(-t * t - 2 * x * t), 0, np.inf, epsabs=0, epsrel=1e-13, limit=200)
        ref *= 2 / math.sqrt(math.pi)
        worst = max(worst, abs(erfcx(x) / ref - 1))
    assert worst <= 1e-10


def test_erfcx_matches_scipy_tightly():
    xs = np.linspace(-10, 30, 4001)
    rel = np.abs(erfcx(xs) / special.erfcx(xs) - 1)
    assert rel.max() < 1e-13


def test_erfcx_no_overflow_large_argument():
    out = erfcx(np.array([1e3, 1e8, 1e150]))
    assert np.all(np.isfinite(out)) and np.all(out > 0)
    assert out[1] == pytest.approx(1 / (1e8 * math.sqrt(math.pi)), rel=1e-12)


def test_erfcx_rejects_non_finite():
    with pytest.raises(ValueError):
        erfcx(float("nan"))
    with pytest.raises(ValueError):
        erfcx(np.array([0.0, np.inf]))


def test_erfcx_decreasing_on_positive_axis():
    xs = np.linspace(0, 60, 3001)
    assert np.all(np.diff(erfcx(xs)) < 0)


@pytest.mark.parametrize("sg", SIGMAS)
@pytest.mark.parametrize("sl", SIGMAS)
def test_gl_pdf_normalizes(sg, sl):
    p = NoiseParams(sg, sl)
    lim = 12 * (sg + sl)
    total, _ = integrate.quad(lambda e: gl_pdf(e, p), -lim, lim, epsabs=1e-13, epsrel=1e-12, limit=200)
    assert abs(total - 1) < 1e-6


@pytest.mark.parametrize("sg", SIGMAS)
@pytest.mark.parametrize("sl", SIGMAS)
def test_gl_pdf_matches_convolution(sg, sl):
    p = NoiseParams(sg, sl)
    grid = np.linspace(-6, 6, 201)
    ours = gl_pdf(grid, p)
    ref = np.array([convolve_gl(e, sg, sl) for e in grid])
    assert np.max(np.abs(ours - ref)) < 1e-8


def test_printed_prefactor_fails_normalization():
    # the typeset closed form integrates to 1 only when sigma_g == sigma_l
    total, _ = integrate.quad(lambda e: printed_gl_pdf(e, 1.0, 2.0), -36, 36, limit=200)
    assert abs(total - 1) > 0.1
    equal, _ = integrate.quad(lambda e: printed_gl_pdf(e, 1.0, 1.0), -24, 24, limit=200)
    assert abs(equal - 1) < 1e-9


def test_gl_pdf_even_and_non_negative():
    p = NoiseParams(0.8, 1.7)
    e = np.random.default_rng(1).normal(size=500) * 10
    f = gl_pdf(e, p)
    assert np.all(f >= 0)
    np.testing.assert_allclose(f, gl_pdf(-e, p), rtol=1e-14, atol=0)


def test_gl_pdf_far_tails_finite():
    p = NoiseParams(2.0, 0.5)
    f = gl_pdf(np.array([-1e4, -300.0, 300.0, 1e4]), p)
    assert np.all(np.isfinite(f)) and np.all(f >= 0)


def test_gl_pdf_degenerate_laplacian_is_gaussian():
    p = NoiseParams(1.0, 1e-4)
    e = np.linspace(-4, 4, 161)
    assert np.max(np.abs(gl_pdf(e, p) - gaussian_pdf(e, p))) < 1e-3


def test_gl_pdf_rejects_nonzero_means():
    with pytest.raises(ValueError):
        gl_pdf(0.0, NoiseParams(1.0, 1.0, mu_g=0.1))


def test_lambda_from_noise_values():
    assert lambda_from_noise(NoiseParams(1.0, math.sqrt(2 * math.pi))) == pytest.approx(1.0, rel=1e-15)
    assert lambda_from_noise(NoiseParams(1.0, 1.0)) == pytest.approx(2.5066283, abs=1e-7)


@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_lambda_quadruples_with_sigma_g(sg, sl):
    base = lambda_from_noise(NoiseParams(sg, sl))
    assert lambda_from_noise(NoiseParams(2 * sg, sl)) == pytest.approx(4 * base, rel=1e-12)


def test_sample_gl_deterministic_and_empty():
    p = NoiseParams(0.3, 0.7)
    np.testing.assert_array_equal(sample_gl(1000, p, 11), sample_gl(1000, p, 11))
    assert not np.array_equal(sample_gl(1000, p, 11), sample_gl(1000, p, 12))
    assert sample_gl(0, p, 1).shape == (0,)


def test_sample_gl_moments():
    p = NoiseParams(0.5, 1.0)
    x = sample_gl(10**6, p, 2024)
    var = p.sigma_g**2 + 2 * p.sigma_l**2
    assert abs(x.mean()) < 4 * math.sqrt(var / x.size)
    assert abs(x.var() / var - 1) < 0.02


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(-20, 20))
def test_gl_pdf_below_laplacian_peak(sg, sl, e):
    # convolution with a probability density cannot exceed the sup of the Laplacian
    f = gl_pdf(e, NoiseParams(sg, sl))
    assert 0 <= f <= 1 / (2 * sl) * (1 + 1e-12)
