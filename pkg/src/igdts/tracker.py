"""Bootstrap particle filter over affine states, scored by the subspace distance."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from igdts.errors import TrackingLost
from igdts.geometry import STATE_FIELDS, AffineState, affine_to_bbox
from igdts.imaging import Frame, region_visible, warp_patch, warp_patches
from igdts.noise_model import make_rng
from igdts.slope import LambdaSequence
from igdts.subspace import SubspaceModel, clean_observation, incremental_update, solve_batch

log = logging.getLogger(__name__)

POSITIVE_FLOOR = 1e-3


@dataclass(frozen=True)
class MotionModel:
    """Per-parameter random-walk standard deviations, in :data:`STATE_FIELDS` order."""

    sigma_diag: tuple = (4.0, 4.0, 0.01, 0.01, 0.002, 0.001)

    def __post_init__(self):
        sig = tuple(float(s) for s in self.sigma_diag)
        if len(sig) != 6 or any(s < 0 or not np.isfinite(s) for s in sig):
            raise ValueError("sigma_diag needs six finite non-negative entries")
        object.__setattr__(self, "sigma_diag", sig)


@dataclass
class TrackerConfig:
    n_particles: int = 600
    patch_side: int = 32
    k_basis: int = 16
    update_interval: int = 5
    lambda_max: float = 0.1
    lambda_min_ratio: float = 0.1
    kappa: float = 10.0
    motion: MotionModel = field(default_factory=MotionModel)
    forgetting: float = 0.95
    seed: int = 0
    subspace_eps: float = 1e-3
    subspace_max_iter: int = 20
    lost_policy: str = "coast"
    workers: int = 1

    def __post_init__(self):
        for name in ("n_particles", "patch_side", "k_basis", "update_interval", "subspace_max_iter", "workers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.patch_side < 2:
            raise ValueError("patch_side must be at least 2")
        if self.k_basis > self.patch_side**2:
            raise ValueError("k_basis cannot exceed patch_side**2")
        if self.lambda_max < 0 or not 0 <= self.lambda_min_ratio <= 1:
            raise ValueError("lambda_max must be >= 0 and lambda_min_ratio in [0, 1]")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if not 0 < self.forgetting <= 1:
            raise ValueError("forgetting must lie in (0, 1]")
        if self.lost_policy not in ("coast", "halt"):
            raise ValueError("lost_policy must be 'coast' or 'halt'")

    def lambda_sequence(self) -> LambdaSequence:
        return LambdaSequence.linear(self.patch_side**2, self.lambda_max, self.lambda_min_ratio)


@dataclass
class TrackResult:
    frame_index: int
    state: AffineState
    bbox: tuple
    distance: float
    log_likelihood: float
    updated_model: bool = False
    lost: bool = False


def _as_array(states):
    if isinstance(states, np.ndarray):
        return np.atleast_2d(states).astype(float), False
    return np.array([s.to_array() for s in states], dtype=float), True


def propagate(states, motion: MotionModel, rng: np.random.Generator):
    """Random-walk step: add independent Gaussian noise to every state parameter.

    Accepts an ``(N, 6)`` array or a sequence of :class:`AffineState` and returns
    the same kind. Scale and aspect are reflected off a small positive floor.
    """
    arr, as_list = _as_array(states)
    if arr.shape[0] == 0:
        raise ValueError("propagate needs at least one state")
    noise = rng.standard_normal(arr.shape) * np.asarray(motion.sigma_diag)
    out = arr + noise
    for col in (3, 4):
        v = out[:, col]
        v = np.where(v < POSITIVE_FLOOR, 2 * POSITIVE_FLOOR - v, v)
        out[:, col] = np.maximum(v, POSITIVE_FLOOR)
    if as_list:
        return [AffineState.from_array(r) for r in out]
    return out


@dataclass
class ParticleScores:
    distances: np.ndarray
    log_likelihoods: np.ndarray
    patches: np.ndarray
    gammas: np.ndarray


def _score_chunk(frame, states, model, lam, config):
    patches = warp_patches(frame, states, config.patch_side)
    visible = region_visible(frame, states, config.patch_side)
    Y_bar = patches - model.mu
    if model.rank == 0:
        gammas = np.zeros_like(Y_bar)
        dist = 0.5 * np.einsum("nd,nd->n", Y_bar, Y_bar)
    else:
        _, gammas, dist, _ = solve_batch(Y_bar, model.U, lam, config.subspace_eps, config.subspace_max_iter)
    dist = np.where(visible, dist, np.inf)
    return patches, gammas, dist


def score_particles(states, frame: Frame, model: SubspaceModel, config: TrackerConfig, lam=None) -> ParticleScores:
    """Distances, log-likelihoods, patches and outlier terms for every particle."""
    arr, _ = _as_array(states)
    lam = lam if lam is not None else config.lambda_sequence()
    n = arr.shape[0]
    workers = max(1, min(config.workers, n))
    if workers == 1:
        parts = [_score_chunk(frame, arr, model, lam, config)]
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        chunks = [arr[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _score_chunk(frame, c, model, lam, config), chunks))
    patches = np.concatenate([p[0] for p in parts])
    gammas = np.concatenate([p[1] for p in parts])
    dist = np.concatenate([p[2] for p in parts])
    ll = np.where(np.isfinite(dist), -config.kappa * dist, -np.inf)
    return ParticleScores(dist, ll, patches, gammas)


def evaluate_particles(states, frame: Frame, model: SubspaceModel, config: TrackerConfig):
    """``(distances, log_likelihoods)`` in input order; off-frame particles get ``(inf, -inf)``."""
    scores = score_particles(states, frame, model, config)
    return scores.distances, scores.log_likelihoods


def select_map(states, log_likelihoods, frame_index: int = 0):
    """Index and state of the most likely particle; ties go to the lowest index."""
    ll = np.asarray(log_likelihoods, dtype=float)
    arr, as_list = _as_array(states)
    if ll.size == 0 or ll.size != arr.shape[0]:
        raise ValueError("states and log-likelihoods must be non-empty and equally long")
    if not np.any(ll > -np.inf):
        raise TrackingLost(frame_index)
    idx = int(np.argmax(ll))
    return idx, AffineState.from_array(arr[idx])


def resample(states, log_likelihoods, n_out: int, rng: np.random.Generator):
    """Systematic resampling with weights proportional to ``exp(log_likelihoods)``."""
    arr, as_list = _as_array(states)
    ll = np.asarray(log_likelihoods, dtype=float)
    if not np.any(np.isfinite(ll)):
        raise ValueError("all particle weights are zero")
    w = np.exp(ll - logsumexp(ll))
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    positions = (rng.random() + np.arange(n_out)) / n_out
    idx = np.searchsorted(cdf, positions, side="right")
    idx = np.minimum(idx, arr.shape[0] - 1)
    out = arr[idx]
    if as_list:
        return [AffineState.from_array(r) for r in out]
    return out


class Tracker:
    """Particle-filter tracker; call :meth:`step` once per frame after the first."""

    def __init__(self, config: TrackerConfig, first_frame: Frame, init_box: Sequence[float]):
        self.config = config
        self.rng = make_rng(config.seed)
        self.lam = config.lambda_sequence()
        side = config.patch_side
        self.state = AffineState.from_box(init_box, side)
        template = warp_patch(first_frame, self.state, side)
        self.model = SubspaceModel.from_template(template, config.k_basis)
        self.particles = np.tile(self.state.to_array(), (config.n_particles, 1))
        self.buffer = [template]
        self.frame_index = 1
        self.results = [
            TrackResult(1, self.state, affine_to_bbox(self.state, side, side), 0.0, 0.0, False)
        ]

    def _maybe_update(self) -> bool:
        if self.frame_index % self.config.update_interval != 0 or not self.buffer:
            return False
        batch = np.column_stack(self.buffer)
        self.model = incremental_update(self.model, batch, self.config.forgetting)
        self.buffer = []
        return True

    def step(self, frame: Frame) -> TrackResult:
        cfg = self.config
        self.frame_index += 1
        side = cfg.patch_side
        particles = propagate(self.particles, cfg.motion, self.rng)
        scores = score_particles(particles, frame, self.model, cfg, self.lam)
        try:
            idx, best = select_map(particles, scores.log_likelihoods, self.frame_index)
        except TrackingLost:
            if cfg.lost_policy == "halt":
                raise
            log.warning("tracking lost at frame %d; coasting", self.frame_index)
            self.particles = np.tile(self.state.to_array(), (cfg.n_particles, 1))
            updated = self._maybe_update()
            result = TrackResult(
                self.frame_index, self.state, affine_to_bbox(self.state, side, side),
                float("inf"), float("-inf"), updated, lost=True,
            )
            self.results.append(result)
            return result

        self.state = best
        cleaned = clean_observation(scores.patches[idx], scores.gammas[idx], self.model.mu)
        self.buffer.append(cleaned)
        updated = self._maybe_update()
        result = TrackResult(
            self.frame_index,
            best,
            affine_to_bbox(best, side, side),
            float(scores.distances[idx]),
            float(scores.log_likelihoods[idx]),
            updated,
        )
        self.results.append(result)
        self.particles = resample(particles, scores.log_likelihoods, cfg.n_particles, self.rng)
        return result


def track_sequence(frames: Sequence[Frame], init_box, config: Optional[TrackerConfig] = None, progress=None):
    """Run the tracker over ``frames``; the first frame is initialized from ``init_box``."""
    config = config or TrackerConfig()
    tracker = Tracker(config, frames[0], init_box)
    for frame in frames[1:]:
        tracker.step(frame)
        if progress is not None:
            progress(tracker.frame_index)
    return tracker.results


__all__ = [
    "STATE_FIELDS",
    "AffineState",
    "MotionModel",
    "ParticleScores",
    "TrackResult",
    "Tracker",
    "TrackerConfig",
    "affine_to_bbox",
    "evaluate_particles",
    "propagate",
    "resample",
    "score_particles",
    "select_map",
    "track_sequence",
]
