"""Sorted-l1 norm, threshold rules and the penalty a threshold rule induces."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from igdts.errors import DimensionError, NumericError


class LambdaSequence:
    """Non-negative, non-increasing weights ``lam_1 >= ... >= lam_n >= 0``."""

    __slots__ = ("values",)

    def __init__(self, values):
        values = np.array(values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise ValueError("lambda values must be finite")
        if np.any(values < 0):
            raise ValueError("lambda values must be non-negative")
        if np.any(np.diff(values) > 0):
            raise ValueError("lambda values must be non-increasing")
        values.setflags(write=False)
        self.values = values

    @classmethod
    def linear(cls, n: int, lambda_max: float, min_ratio: float = 0.1) -> "LambdaSequence":
        """Evenly spaced from ``lambda_max`` down to ``min_ratio * lambda_max``."""
        if n < 1:
            raise ValueError("n must be at least 1")
        if not 0 <= min_ratio <= 1:
            raise ValueError("min_ratio must lie in [0, 1]")
        lam_min = min_ratio * lambda_max
        if n == 1:
            return cls([lambda_max])
        i = np.arange(n)
        return cls(lambda_max - i * (lambda_max - lam_min) / (n - 1))

    @classmethod
    def constant(cls, n: int, value: float) -> "LambdaSequence":
        return cls(np.full(n, float(value)))

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __repr__(self):
        return f"LambdaSequence(n={len(self)}, max={self.values[0] if len(self) else 0:g})"


def as_lambda(lam) -> LambdaSequence:
    return lam if isinstance(lam, LambdaSequence) else LambdaSequence(lam)


def _check_len(x, lam):
    if x.shape[-1] != len(lam):
        raise DimensionError(f"vector length {x.shape[-1]} does not match lambda length {len(lam)}")


def sorted_l1_norm(x, lam) -> float:
    """``sum_j lam_j |x|_(j)`` with magnitudes sorted in decreasing order."""
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=float).ravel()
    _check_len(x, lam)
    mags = np.sort(np.abs(x))[::-1]
    return float(np.dot(lam.values, mags))


def soft_threshold(x, lam):
    """``sign(x) * max(|x| - lam, 0)``, elementwise."""
    x = np.asarray(x, dtype=float)
    if np.any(np.asarray(lam) < 0):
        raise ValueError("soft threshold needs lam >= 0")
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def _magnitude_order(mags):
    """Indices sorting each row of ``mags`` by decreasing value, ties by ascending index."""
    order = np.argsort(-mags, axis=-1)
    ranked = np.take_along_axis(mags, order, axis=-1)
    tied = np.any((ranked[..., 1:] == ranked[..., :-1]) & (ranked[..., 1:] > 0), axis=-1)
    if np.any(tied):
        # the fast sort is not stable; redo rows whose nonzero ties need index order
        if mags.ndim == 1:
            order = np.argsort(-mags, kind="stable")
        else:
            order[tied] = np.argsort(-mags[tied], axis=-1, kind="stable")
        ranked = np.take_along_axis(mags, order, axis=-1)
    return order, ranked


def sorted_soft_threshold(x, lam):
    """Pair the i-th largest magnitude of ``x`` with ``lam_i`` and soft-threshold it.

    Ties in magnitude are ranked by ascending original index. ``x`` may be a
    2-d array, in which case every row is thresholded independently.
    """
    return sorted_soft_threshold_with_penalty(x, lam)[0]


def sorted_soft_threshold_with_penalty(x, lam):
    """Sorted soft threshold together with ``J_lam`` of the result, row by row.

    The penalty reuses the ranking of ``x``; only rows whose shrunk magnitudes
    come out of order need another sort.
    """
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=float)
    _check_len(x, lam)
    mags = np.abs(x)
    order, ranked = _magnitude_order(mags)
    shrunk = np.maximum(ranked - lam.values, 0.0)
    out = np.empty_like(x)
    np.put_along_axis(out, order, shrunk, axis=-1)
    unsorted = np.any(shrunk[..., 1:] > shrunk[..., :-1], axis=-1)
    if np.any(unsorted):
        if shrunk.ndim == 1:
            shrunk = -np.sort(-shrunk)
        else:
            shrunk[unsorted] = -np.sort(-shrunk[unsorted], axis=-1)
    # per-row sum, independent of how many rows share the call
    return np.copysign(out, x), np.einsum("...d,d->...", shrunk, lam.values)


class ThresholdRule:
    """Scalar threshold rule ``Theta(x; lam)``.

    Subclasses implement :meth:`apply`. :meth:`inverse` falls back to bisection,
    which only relies on the rule being non-decreasing and bounded by the identity.
    """

    name = "generic"

    def apply(self, x, lam):
        raise NotImplementedError

    def __call__(self, x, lam):
        return self.apply(x, lam)

    def inverse(self, u: float, lam: float, bracket: float = 1.0, tol: float = 1e-13) -> float:
        return _bisect_inverse(self, u, lam, bracket, tol)


class SoftRule(ThresholdRule):
    name = "soft"

    def apply(self, x, lam):
        return soft_threshold(x, lam)

    def inverse(self, u, lam, bracket=1.0, tol=1e-13):
        # kill zone is [-lam, lam], so the sup at u = 0 is lam itself
        return u + lam


class SortedSoftRule(ThresholdRule):
    """Sorted soft threshold. As a scalar rule it acts on one sorted coordinate
    with its paired weight, where it coincides with the soft rule."""

    name = "sorted-soft"

    def apply(self, x, lam):
        if np.ndim(lam) == 0:
            return soft_threshold(x, lam)
        return sorted_soft_threshold(x, lam)

    def inverse(self, u, lam, bracket=1.0, tol=1e-13):
        return u + lam


def _bisect_inverse(rule, u, lam, bracket, tol):
    lo = u
    if rule(lo, lam) > u:
        raise NumericError(f"rule exceeds the identity at t={lo}")
    hi = u + bracket
    for _ in range(200):
        if rule(hi, lam) > u:
            break
        lo, hi = hi, hi + 2 * (hi - u)
    else:
        raise NumericError("could not bracket the threshold inverse")
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if rule(mid, lam) <= u:
            lo = mid
        else:
            hi = mid
    return lo


def threshold_inverse(rule: ThresholdRule, u: float, lam: float, **kwargs) -> float:
    """``sup {t : Theta(t; lam) <= u}`` for ``u >= 0``."""
    if u < 0:
        raise ValueError("threshold_inverse needs u >= 0")
    return rule.inverse(u, lam, **kwargs)


def penalty_from_threshold(rule: ThresholdRule, theta: float, lam: float) -> float:
    """Penalty induced by a threshold rule, by quadrature of ``Theta^{-1}(u) - u`` over ``[0, |theta|]``."""
    upper = abs(theta)
    if upper == 0:
        return 0.0
    value, _ = integrate.quad(
        lambda u: threshold_inverse(rule, u, lam) - u, 0.0, upper, epsabs=1e-12, epsrel=1e-12
    )
    if not math.isfinite(value):
        raise NumericError("penalty quadrature diverged")
    return value
