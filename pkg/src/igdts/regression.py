"""Linear regression estimators and the template distances built on them.

The model is ``y = X @ beta + omega + gamma`` with dense Gaussian ``omega`` and
sparse ``gamma``. :func:`igdts_fit` alternates a gradient step on ``beta`` with
a sorted soft threshold on the residual to recover ``gamma``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from igdts.errors import DimensionError, NumericError
from igdts.slope import LambdaSequence, as_lambda, sorted_l1_norm, sorted_soft_threshold

log = logging.getLogger(__name__)

MSE_SENTINEL = np.inf


def _design(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"design matrix must be n x p with n, p >= 1, got shape {X.shape}")
    if X.shape[0] != y.size:
        raise DimensionError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must be finite")
    return X, y


@dataclass
class RegressionProblem:
    X: np.ndarray
    y: np.ndarray
    lam: LambdaSequence
    eta: Union[float, str] = "auto"
    eps: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        self.X, self.y = _design(self.X, self.y)
        self.lam = as_lambda(self.lam)
        if len(self.lam) != self.y.size:
            raise DimensionError(f"lambda has length {len(self.lam)}, expected {self.y.size}")
        if self.eta != "auto" and not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError("eta must be positive or 'auto'")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class IgdtsSolution:
    """Output of :func:`igdts_fit`.

    ``mse_trace`` and ``objective_trace`` hold one entry per computed iterate,
    starting with the initial point. When the loop stopped because the MSE rose,
    the last entry is the rejected iterate and ``iterations`` indexes the one
    actually returned.
    """

    beta: np.ndarray
    gamma: np.ndarray
    mse_trace: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    stop_reason: str = ""
    eta: float = field(default=np.nan, repr=False)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[self.iterations])

    @property
    def mse(self) -> float:
        return float(self.mse_trace[self.iterations])


def ols_fit(X, y) -> np.ndarray:
    """Least-squares coefficients; minimum-norm solution when ``X`` is rank deficient."""
    X, y = _design(X, y)
    return np.linalg.pinv(X) @ y


def lad_fit(X, y, smoothing: float = 1e-6, max_iter: int = 200, return_info: bool = False):
    """Least absolute deviations by iteratively reweighted least squares.

    Weights are ``1 / max(|r_i|, smoothing)``. The iterate with the smallest l1
    objective is returned. With ``return_info`` the result is ``(beta, converged)``.
    """
    X, y = _design(X, y)
    beta = ols_fit(X, y)
    best = beta
    best_obj = np.abs(y - X @ beta).sum()
    converged = False
    prev = best_obj
    for _ in range(max_iter):
        r = y - X @ beta
        w = np.sqrt(1.0 / np.maximum(np.abs(r), smoothing))
        beta = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)[0]
        obj = np.abs(y - X @ beta).sum()
        if obj < best_obj:
            best, best_obj = beta, obj
        if abs(prev - obj) <= 1e-12 * max(1.0, prev):
            converged = True
            break
        prev = obj
    if not converged:
        log.debug("lad_fit stopped at max_iter=%d", max_iter)
    return (best, converged) if return_info else best


def objective_value(beta, gamma, X, y, lam) -> float:
    """``0.5 * ||y - X beta - gamma||^2 + J_lam(gamma)``."""
    X, y = _design(X, y)
    beta = np.asarray(beta, dtype=float).ravel()
    gamma = np.asarray(gamma, dtype=float).ravel()
    if beta.size != X.shape[1] or gamma.size != y.size:
        raise DimensionError("beta/gamma sizes do not match the design")
    resid = y - X @ beta - gamma
    return 0.5 * float(resid @ resid) + sorted_l1_norm(gamma, lam)


def default_step_size(X, tol: float = 1e-6, max_iter: int = 10_000) -> float:
    """Step ``1 / L`` with ``L`` the top eigenvalue of ``X.T @ X``, by power iteration."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.size == 0 or not np.any(X):
        raise ValueError("design matrix is empty or all zeros")
    gram = X.T @ X
    v = np.random.default_rng(0).standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    top = 0.0
    for _ in range(max_iter):
        w = gram @ v
        est = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0:
            # started in the null space
            v = np.ones_like(v) / np.sqrt(v.size)
            continue
        v = w / norm
        if abs(est - top) <= tol * 1e-3 * est:
            top = est
            break
        top = est
    # Rayleigh quotient after convergence; never below the true top by more than tol
    top = max(top, float(v @ gram @ v))
    return 1.0 / top


def igdts_fit(problem: RegressionProblem) -> IgdtsSolution:
    """Iterative gradient descent with sorted soft-threshold selection.

    Starts from the least-squares ``beta`` and ``gamma = 0``. Each iteration takes
    one gradient step on ``beta`` against ``y - gamma`` and re-estimates ``gamma``
    as the sorted soft threshold of the new residual. The loop ends when the MSE
    ``||y - X beta - gamma||^2 / n`` rises (the previous iterate is returned),
    changes by less than ``eps``, or ``max_iter`` is reached.

    Raises:
        NumericError: if an iterate contains non-finite values.
    """
    X, y, lam = problem.X, problem.y, problem.lam
    n = y.size
    eta = default_step_size(X) if problem.eta == "auto" else float(problem.eta)

    beta = ols_fit(X, y)
    gamma = np.zeros(n)
    resid = y - X @ beta
    mse_trace = [float(resid @ resid) / n]
    obj_trace = [objective_value(beta, gamma, X, y, lam)]
    mse_prev = MSE_SENTINEL
    stop = "max_iter"
    returned = None

    for j in range(problem.max_iter):
        # overflow surfaces as the NumericError below
        with np.errstate(over="ignore", invalid="ignore"):
            y_adj = y - gamma
            beta_new = beta - eta * (X.T @ (X @ beta - y_adj))
            r = y - X @ beta_new
            gamma_new = sorted_soft_threshold(r, lam)
            diff = r - gamma_new
            mse = float(diff @ diff) / n
        if not (np.isfinite(mse) and np.all(np.isfinite(beta_new))):
            raise NumericError(f"non-finite iterate at iteration {j + 1}")
        mse_trace.append(mse)
        obj_trace.append(0.5 * float(diff @ diff) + sorted_l1_norm(gamma_new, lam))

        if mse > mse_prev:
            stop = "mse_increase"
            returned = j
            break
        beta, gamma = beta_new, gamma_new
        if abs(mse - mse_prev) < problem.eps:
            stop = "tolerance"
            returned = j + 1
            break
        mse_prev = mse

    if returned is None:
        returned = len(obj_trace) - 1
    return IgdtsSolution(
        beta=beta,
        gamma=gamma,
        mse_trace=np.array(mse_trace),
        objective_trace=np.array(obj_trace),
        iterations=returned,
        converged=stop != "max_iter",
        stop_reason=stop,
        eta=eta,
    )


def d_ols(y, X) -> float:
    X, y = _design(X, y)
    r = y - X @ ols_fit(X, y)
    return 0.5 * float(r @ r)


def d_lad(y, X) -> float:
    # half the l1 residual, as the distance is conventionally written
    X, y = _design(X, y)
    return 0.5 * float(np.abs(y - X @ lad_fit(X, y)).sum())


def d_lss(y, X, lam: float, **kwargs) -> float:
    """IGDTS distance with a uniform weight ``lam`` on every residual."""
    X, y = _design(X, y)
    return d_igdts(y, X, LambdaSequence.constant(y.size, lam), **kwargs)


def d_igdts(y, X, lam, **kwargs) -> float:
    X, y = _design(X, y)
    sol = igdts_fit(RegressionProblem(X, y, lam, **kwargs))
    return sol.objective
