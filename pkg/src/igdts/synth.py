"""Synthetic regression data and image sequences with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from igdts.noise_model import make_rng

MOTION_PRESETS = {
    # per-frame random-walk std of the target centre, in pixels
    "static": 0.0,
    "slow": 0.75,
    "random_walk": 1.5,
    "fast": 3.0,
}


@dataclass
class RegressionData:
    X: np.ndarray
    y: np.ndarray
    beta: np.ndarray
    outliers: np.ndarray


def synth_regression(n: int, p: int, outlier_frac: float, sigma_g: float, sigma_l: float, seed: int) -> RegressionData:
    """Gaussian design, dense Gaussian noise plus Laplacian noise on a random subset of rows.

    The Laplacian component is drawn at scale ``sigma_l`` and shifted away from
    zero by ``10 * sigma_g`` so that planted outliers are distinguishable from
    the dense noise.
    """
    if not 0 <= outlier_frac < 1:
        raise ValueError("outlier_frac must lie in [0, 1)")
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    if sigma_g < 0 or sigma_l < 0:
        raise ValueError("noise scales must be non-negative")
    rng = make_rng(seed)
    X = rng.standard_normal((n, p))
    beta = rng.standard_normal(p)
    y = X @ beta + sigma_g * rng.standard_normal(n)
    k = int(round(outlier_frac * n))
    idx = np.sort(rng.choice(n, size=k, replace=False)) if k else np.zeros(0, dtype=int)
    if k:
        signs = rng.choice([-1.0, 1.0], size=k)
        y[idx] += signs * (10 * sigma_g + np.abs(rng.laplace(0.0, sigma_l, size=k)))
    return RegressionData(X, y, beta, idx)


def value_noise(h: int, w: int, cell: int, rng: np.random.Generator, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Bilinearly interpolated lattice noise with lattice spacing ``cell`` pixels."""
    gh, gw = h // cell + 2, w // cell + 2
    grid = rng.uniform(lo, hi, size=(gh, gw))
    ys = np.arange(h) / cell
    xs = np.arange(w) / cell
    y0, x0 = np.floor(ys).astype(int), np.floor(xs).astype(int)
    fy, fx = (ys - y0)[:, None], (xs - x0)[None, :]
    a = grid[y0][:, x0]
    b = grid[y0][:, x0 + 1]
    c = grid[y0 + 1][:, x0]
    d = grid[y0 + 1][:, x0 + 1]
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy


@dataclass
class SyntheticSequence:
    frames: list
    boxes: np.ndarray
    occluder_masks: list = field(default_factory=list)
    target_masks: list = field(default_factory=list)


def synth_sequence(
    n_frames: int = 120,
    target_size: int = 24,
    motion_preset: str = "random_walk",
    occlusion_window: Optional[tuple] = (50, 69),
    illumination_ramp: float = 0.15,
    seed: int = 0,
    frame_shape: tuple = (120, 160),
    occlusion_fraction: float = 0.3,
    background_cell: int = 3,
    background_range: tuple = (0.1, 0.8),
    occluder_range: tuple = (0.55, 0.85),
    sensor_noise: float = 0.01,
) -> SyntheticSequence:
    """Textured square target moving over a textured background.

    Frames are 1-indexed in ``occlusion_window`` (inclusive). During the window a
    block covering ``occlusion_fraction`` of the target area is painted over its
    left side. Frame ``t`` has its intensities multiplied by
    ``1 + illumination_ramp * (t - 1) / (n_frames - 1)``.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    if motion_preset not in MOTION_PRESETS:
        raise ValueError(f"unknown motion preset {motion_preset!r}; choose from {sorted(MOTION_PRESETS)}")
    h, w = frame_shape
    if target_size < 4 or target_size > min(h, w) // 2:
        raise ValueError("target_size must be between 4 and half the frame size")
    if occlusion_window is not None:
        a, b = occlusion_window
        if not (1 <= a <= b <= n_frames):
            raise ValueError("occlusion window must satisfy 1 <= start <= end <= n_frames")
    if not 0 < occlusion_fraction <= 1:
        raise ValueError("occlusion_fraction must lie in (0, 1]")
    if illumination_ramp < 0:
        raise ValueError("illumination_ramp must be non-negative")

    rng = make_rng(seed)
    background = value_noise(h, w, background_cell, rng, *background_range)
    texture = value_noise(target_size, target_size, 4, rng, 0.1, 0.85)
    occluder_tex = value_noise(target_size, target_size, 6, rng, *occluder_range)
    step = MOTION_PRESETS[motion_preset]
    margin = target_size
    cx, cy = w / 2.0, h / 2.0
    occ_w = int(np.ceil(occlusion_fraction * target_size))

    frames, boxes, occ_masks, tgt_masks = [], [], [], []
    for t in range(1, n_frames + 1):
        if t > 1 and step > 0:
            cx = float(np.clip(cx + step * rng.standard_normal(), margin, w - margin))
            cy = float(np.clip(cy + step * rng.standard_normal(), margin, h - margin))
        x0 = int(round(cx - target_size / 2.0))
        y0 = int(round(cy - target_size / 2.0))
        img = background.copy()
        img[y0 : y0 + target_size, x0 : x0 + target_size] = texture
        tgt = np.zeros((h, w), dtype=bool)
        tgt[y0 : y0 + target_size, x0 : x0 + target_size] = True
        occ = np.zeros((h, w), dtype=bool)
        if occlusion_window is not None and occlusion_window[0] <= t <= occlusion_window[1]:
            occ[y0 : y0 + target_size, x0 : x0 + occ_w] = True
            img[y0 : y0 + target_size, x0 : x0 + occ_w] = occluder_tex[:, :occ_w]
        gain = 1.0 + illumination_ramp * ((t - 1) / (n_frames - 1) if n_frames > 1 else 0.0)
        img = img * gain + sensor_noise * rng.standard_normal((h, w))
        frames.append(np.clip(img, 0.0, 1.0))
        boxes.append((x0, y0, target_size, target_size))
        occ_masks.append(occ)
        tgt_masks.append(tgt)
    return SyntheticSequence(frames, np.array(boxes, dtype=float), occ_masks, tgt_masks)
