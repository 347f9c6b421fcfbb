"""Gaussian, Laplacian and Gaussian-Laplacian densities.

The Gaussian-Laplacian density is the law of ``omega + gamma`` with
``omega ~ N(0, sigma_g^2)`` and ``gamma ~ Laplace(0, sigma_l)``. It is written in
terms of the scaled complementary error function so that both tails stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT_PI = math.sqrt(math.pi)
SQRT_2 = math.sqrt(2.0)

# erfcx branch points
_CF_START = 2.0
_ASYMPTOTIC_START = 26.0
_CF_TERMS = 160
_ASYMPTOTIC_TERMS = 8


@dataclass(frozen=True)
class NoiseParams:
    """Scales and means of the Gaussian and Laplacian noise components."""

    sigma_g: float
    sigma_l: float
    mu_g: float = 0.0
    mu_l: float = 0.0

    def __post_init__(self):
        for name in ("sigma_g", "sigma_l"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        for name in ("mu_g", "mu_l"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def gaussian_pdf(x, params: NoiseParams):
    x = np.asarray(x, dtype=float)
    z = (x - params.mu_g) / params.sigma_g
    return np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * params.sigma_g)


def laplacian_pdf(x, params: NoiseParams):
    x = np.asarray(x, dtype=float)
    return np.exp(-np.abs(x - params.mu_l) / params.sigma_l) / (2.0 * params.sigma_l)


def _erfcx_cf(x):
    # Continued fraction erfc(x) e^{x^2} sqrt(pi) = 1/(x+ (1/2)/(x+ 1/(x+ (3/2)/(x+ ...)))),
    # evaluated backwards; accurate to ~1e-15 for x >= 2 with this many terms.
    tail = np.zeros_like(x)
    for k in range(_CF_TERMS, 0, -1):
        tail = (0.5 * k) / (x + tail)
    return 1.0 / (SQRT_PI * (x + tail))


def _erfcx_asymptotic(x):
    inv = 1.0 / (2.0 * x * x)
    total = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(1, _ASYMPTOTIC_TERMS):
        term = -term * (2 * k - 1) * inv
        total = total + term
    return total / (x * SQRT_PI)


_erfc = np.vectorize(math.erfc, otypes=[float])


def erfcx(x):
    """Scaled complementary error function ``exp(x**2) * erfc(x)``.

    Works elementwise on arrays. Large positive arguments never form
    ``exp(x**2)``; below about -26.6 the true value overflows and ``inf`` is
    returned.

    Raises:
        ValueError: if any input is NaN or infinite.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("erfcx is only defined for finite arguments")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)

    small = x < _CF_START
    mid = (x >= _CF_START) & (x <= _ASYMPTOTIC_START)
    big = x > _ASYMPTOTIC_START
    if small.any():
        xs = x[small]
        with np.errstate(over="ignore"):
            out[small] = np.exp(xs * xs) * _erfc(xs)
    if mid.any():
        out[mid] = _erfcx_cf(x[mid])
    if big.any():
        out[big] = _erfcx_asymptotic(x[big])
    return out[0] if scalar else out


def _damped_erfcx(a, e):
    """``exp(-e**2) * erfcx(a - e)`` without overflow when ``a - e`` is very negative."""
    t = a - e
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = np.exp(-e[pos] ** 2) * erfcx(t[pos])
    neg = ~pos
    if neg.any():
        en = e[neg]
        # erfcx(-s) = 2 exp(s^2) - erfcx(s); fold exp(-e^2) into the first term
        out[neg] = 2.0 * np.exp(a * a - 2.0 * a * en) - np.exp(-en * en) * erfcx(en - a)
    return out


def gl_pdf(eps, params: NoiseParams):
    """Density of the sum of zero-mean Gaussian and Laplacian noise.

    ``f(e) = 1/(4 s_l) exp(-e^2 / (2 s_g^2)) [erfcx(a - e/(sqrt2 s_g)) + erfcx(a + e/(sqrt2 s_g))]``
    with ``a = s_g / (sqrt2 s_l)``.
    """
    if params.mu_g != 0.0 or params.mu_l != 0.0:
        raise ValueError("gl_pdf is defined for zero-mean noise only")
    eps = np.asarray(eps, dtype=float)
    scalar = eps.ndim == 0
    e = np.atleast_1d(eps) / (SQRT_2 * params.sigma_g)
    a = params.sigma_g / (SQRT_2 * params.sigma_l)
    dens = (_damped_erfcx(a, e) + _damped_erfcx(a, -e)) / (4.0 * params.sigma_l)
    return dens[0] if scalar else dens


def lambda_from_noise(params: NoiseParams) -> float:
    """Regularization weight ``sqrt(2 pi) sigma_g^2 / sigma_l`` implied by the noise levels."""
    return math.sqrt(2.0 * math.pi) * params.sigma_g**2 / params.sigma_l


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; one seed gives one reproducible stream."""
    return np.random.Generator(np.random.Philox(seed))


def sample_gl(n: int, params: NoiseParams, seed: int) -> np.ndarray:
    """Draw ``n`` samples of Gaussian plus Laplacian noise."""
    if n <= 0:
        return np.empty(0)
    rng = make_rng(seed)
    omega = rng.normal(params.mu_g, params.sigma_g, size=n)
    gamma = rng.laplace(params.mu_l, params.sigma_l, size=n)
    return omega + gamma
