"""PCA appearance model with a sparse outlier term.

An observation is modelled as ``y = mu + U z + omega + gamma``. Because ``U`` has
orthonormal columns the coefficient step is just a projection, so the distance
solve alternates ``z = U.T (y_bar - gamma)`` with a sorted soft threshold of the
reconstruction residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from igdts.errors import DimensionError
from igdts.slope import as_lambda, sorted_soft_threshold, sorted_soft_threshold_with_penalty

ORTHO_TOL = 1e-8
_RANK_TOL = 1e-10


@dataclass
class SubspaceModel:
    """Mean template, orthonormal basis (``d x r`` with ``r <= k``) and singular values.

    ``n_eff`` is the effective number of samples seen under forgetting; an empty
    model has ``n_eff == 0``.
    """

    mu: np.ndarray
    U: np.ndarray
    sigma: np.ndarray
    n_eff: float = 0.0
    k: int = 16

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).ravel()
        d = self.mu.size
        self.U = np.asarray(self.U, dtype=float).reshape(d, -1)
        self.sigma = np.asarray(self.sigma, dtype=float).ravel()
        if self.sigma.size != self.U.shape[1]:
            raise DimensionError("sigma must have one entry per basis column")
        if self.U.shape[1] > self.k:
            raise ValueError(f"basis has {self.U.shape[1]} columns but k={self.k}")
        if self.k > d:
            raise ValueError("k cannot exceed the observation dimension")

    @classmethod
    def empty(cls, d: int, k: int = 16) -> "SubspaceModel":
        return cls(np.zeros(d), np.zeros((d, 0)), np.zeros(0), 0.0, k)

    @classmethod
    def from_template(cls, template, k: int = 16) -> "SubspaceModel":
        """Mean-only model seeded from a single observation."""
        template = np.asarray(template, dtype=float).ravel()
        return cls(template.copy(), np.zeros((template.size, 0)), np.zeros(0), 1.0, k)

    @property
    def d(self) -> int:
        return self.mu.size

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    @property
    def is_empty(self) -> bool:
        return self.n_eff == 0

    def orthonormality_error(self) -> float:
        if self.rank == 0:
            return 0.0
        return float(np.abs(self.U.T @ self.U - np.eye(self.rank)).max())


@dataclass
class IgdtsSubspaceSolution:
    z: np.ndarray
    gamma: np.ndarray
    distance: float
    objective_trace: np.ndarray
    iterations: int


def _require_orthonormal(U):
    if U.shape[1] and np.abs(U.T @ U - np.eye(U.shape[1])).max() > ORTHO_TOL:
        raise ValueError("basis U must have orthonormal columns")


def _row_objective(resid, gamma, lam_values):
    mags = -np.sort(-np.abs(gamma), axis=-1)
    return 0.5 * np.einsum("...i,...i->...", resid, resid) + mags @ lam_values


def solve_batch(Y_bar, U, lam, eps: float = 1e-8, max_iter: int = 100):
    """Solve the subspace distance problem for each row of ``Y_bar``.

    Every row iterates until its own objective changes by less than ``eps``, so
    a row's result does not depend on which other rows share the batch.

    Returns:
        ``(Z, Gamma, distances, iterations)`` with one row per input row.
    """
    lam = as_lambda(lam)
    Y_bar = np.atleast_2d(np.asarray(Y_bar, dtype=float))
    n, d = Y_bar.shape
    if U.shape[0] != d or len(lam) != d:
        raise DimensionError("observation, basis and lambda dimensions disagree")
    Ut = np.ascontiguousarray(U.T)
    Z = np.zeros((n, U.shape[1]))
    Gamma = np.zeros_like(Y_bar)
    dist = np.full(n, np.inf)
    iters = np.zeros(n, dtype=int)
    active = np.arange(n)
    for it in range(1, max_iter + 1):
        Ya = Y_bar[active]
        Za = _project(Ya - Gamma[active], Ut)
        R = Ya - _reconstruct(Za, Ut)
        Ga, penalty = sorted_soft_threshold_with_penalty(R, lam)
        E = R - Ga
        obj = 0.5 * np.einsum("nd,nd->n", E, E) + penalty
        done = np.abs(dist[active] - obj) < eps
        Z[active], Gamma[active], dist[active] = Za, Ga, obj
        iters[active] = it
        active = active[~done]
        if active.size == 0:
            break
    return Z, Gamma, dist, iters


def _project(A, Ut):
    # row-by-row dot products: results must not depend on batch composition
    return np.einsum("nd,kd->nk", A, Ut)


def _reconstruct(Z, Ut):
    return np.einsum("nk,kd->nd", Z, Ut)


def igdts_subspace_solve(y_bar, U, lam, eps: float = 1e-8, max_iter: int = 100) -> IgdtsSubspaceSolution:
    """Minimize ``0.5 ||y_bar - U z - gamma||^2 + J_lam(gamma)`` over ``z`` and ``gamma``."""
    y_bar = np.asarray(y_bar, dtype=float).ravel()
    U = np.asarray(U, dtype=float).reshape(y_bar.size, -1)
    _require_orthonormal(U)
    lam = as_lambda(lam)
    if len(lam) != y_bar.size:
        raise DimensionError("lambda length must match the observation dimension")
    Ut = U.T
    gamma = np.zeros_like(y_bar)
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        z = Ut @ (y_bar - gamma)
        r = y_bar - U @ z
        gamma = sorted_soft_threshold(r, lam)
        obj = float(_row_objective(r - gamma, gamma, lam.values))
        trace.append(obj)
        if len(trace) > 1 and abs(trace[-2] - obj) < eps:
            break
    return IgdtsSubspaceSolution(z, gamma, trace[-1], np.array(trace), it)


def subspace_distance(y, model: SubspaceModel, lam, eps: float = 1e-8, max_iter: int = 100) -> float:
    """Distance of ``y`` to the model; ``0.5 ||y - mu||^2`` while the model has no basis."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != model.d:
        raise DimensionError(f"observation has {y.size} entries, model expects {model.d}")
    y_bar = y - model.mu
    if model.rank == 0:
        return 0.5 * float(y_bar @ y_bar)
    return igdts_subspace_solve(y_bar, model.U, lam, eps, max_iter).distance


def log_likelihood(distance, kappa: float):
    return -kappa * np.asarray(distance, dtype=float)


def observation_likelihood(y, model: SubspaceModel, lam, kappa: float, **kwargs) -> float:
    """``exp(-kappa * d(y; U, mu))``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return float(np.exp(log_likelihood(subspace_distance(y, model, lam, **kwargs), kappa)))


def clean_observation(y_o, gamma_o, mu) -> np.ndarray:
    """Replace pixels flagged as outliers (non-zero ``gamma_o``) with the model mean."""
    y_o, gamma_o, mu = (np.asarray(a, dtype=float).ravel() for a in (y_o, gamma_o, mu))
    if not (y_o.size == gamma_o.size == mu.size):
        raise DimensionError("y_o, gamma_o and mu must have equal length")
    return np.where(gamma_o != 0, mu, y_o)


def _orth(A):
    if A.shape[1] == 0:
        return A
    Q, s, _ = np.linalg.svd(A, full_matrices=False)
    keep = s > _RANK_TOL * max(1.0, s[0] if s.size else 0.0)
    return Q[:, keep]


def _reorthonormalize(U):
    if U.shape[1] == 0:
        return U
    Q, R = np.linalg.qr(U)
    # keep column directions as they were
    return Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))


def incremental_update(model: SubspaceModel, batch, forgetting: float = 0.95) -> SubspaceModel:
    """Fold a batch of observations (``d x m``, one per column) into the model.

    Mean-augmented incremental SVD: the prior factorization is scaled by the
    forgetting factor, the centred batch and a mean-shift column are appended,
    and the small core is re-decomposed and truncated to ``k`` columns. On an
    empty model this is batch PCA.
    """
    if not 0 < forgetting <= 1:
        raise ValueError("forgetting must lie in (0, 1]")
    batch = np.asarray(batch, dtype=float)
    if batch.ndim == 1:
        batch = batch[:, None]
    if batch.shape[0] != model.d:
        raise DimensionError(f"batch rows {batch.shape[0]} != model dimension {model.d}")
    m = batch.shape[1]
    if m == 0:
        return model
    mu_b = batch.mean(axis=1)
    centred = batch - mu_b[:, None]

    if model.is_empty:
        U, s, _ = np.linalg.svd(centred, full_matrices=False)
        keep = s > _RANK_TOL * max(1.0, s[0])
        U, s = U[:, keep][:, : model.k], s[keep][: model.k]
        return SubspaceModel(mu_b, _reorthonormalize(U), s, float(m), model.k)

    n_prior = forgetting * model.n_eff
    n_new = n_prior + m
    mu_new = (n_prior * model.mu + m * mu_b) / n_new
    shift = np.sqrt(n_prior * m / n_new) * (mu_b - model.mu)
    B = np.column_stack([centred, shift])

    proj = model.U.T @ B
    resid = B - model.U @ proj
    Q = _orth(resid)
    r, q = model.rank, Q.shape[1]
    core = np.zeros((r + q, r + B.shape[1]))
    core[:r, :r] = np.diag(forgetting * model.sigma)
    core[:r, r:] = proj
    core[r:, r:] = Q.T @ resid
    Uc, sc, _ = np.linalg.svd(core, full_matrices=False)
    keep = sc > _RANK_TOL * max(1.0, sc[0] if sc.size else 0.0)
    Uc, sc = Uc[:, keep][:, : model.k], sc[keep][: model.k]
    U_new = np.hstack([model.U, Q]) @ Uc
    return SubspaceModel(mu_new, _reorthonormalize(U_new), sc, n_new, model.k)
