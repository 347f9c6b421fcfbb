"""Affine target state and the boxes it induces."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

STATE_FIELDS = ("tx", "ty", "theta", "scale", "aspect", "skew")


@dataclass(frozen=True)
class AffineState:
    """Warp of the template square into the frame.

    The frame point for template coordinate ``u`` is ``A @ u + (tx, ty)`` with
    ``A = R(theta) @ [[1, skew], [0, 1]] @ diag(scale, scale * aspect)``.
    Template coordinates are in template pixels, centred on the template.
    """

    tx: float
    ty: float
    theta: float = 0.0
    scale: float = 1.0
    aspect: float = 1.0
    skew: float = 0.0

    def __post_init__(self):
        values = astuple(self)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"state has non-finite parameters: {values}")
        if self.scale <= 0 or self.aspect <= 0:
            raise ValueError("scale and aspect must be positive")

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a) -> "AffineState":
        return cls(*(float(v) for v in a))

    def matrix(self) -> np.ndarray:
        return affine_matrices(self.to_array()[None])[0]

    @classmethod
    def from_matrix(cls, A, t) -> "AffineState":
        """Inverse of :meth:`matrix` for any ``A`` with positive determinant."""
        A = np.asarray(A, dtype=float)
        if np.linalg.det(A) <= 0:
            raise ValueError("affine matrix must have positive determinant")
        theta = math.atan2(A[1, 0], A[0, 0])
        c, s = math.cos(theta), math.sin(theta)
        T = np.array([[c, s], [-s, c]]) @ A  # upper triangular
        scale = T[0, 0]
        aspect = T[1, 1] / scale
        skew = T[0, 1] / T[1, 1]
        return cls(float(t[0]), float(t[1]), theta, scale, aspect, skew)

    @classmethod
    def from_box(cls, box, template_side: int) -> "AffineState":
        """Axis-aligned state whose template maps exactly onto ``box = (x, y, w, h)``."""
        x, y, w, h = box
        return cls(x + w / 2.0, y + h / 2.0, 0.0, w / template_side, h / w, 0.0)


def affine_matrices(states: np.ndarray) -> np.ndarray:
    """``(N, 6)`` state array to ``(N, 2, 2)`` linear parts."""
    states = np.atleast_2d(states)
    th, s, a, k = states[:, 2], states[:, 3], states[:, 4], states[:, 5]
    c, sn = np.cos(th), np.sin(th)
    sx, sy = s, s * a
    A = np.empty((states.shape[0], 2, 2))
    A[:, 0, 0] = c * sx
    A[:, 0, 1] = (c * k - sn) * sy
    A[:, 1, 0] = sn * sx
    A[:, 1, 1] = (sn * k + c) * sy
    return A


def affine_to_bbox(state: AffineState, template_w: float, template_h: float):
    """Axis-aligned bounding box ``(x, y, w, h)`` of the warped template corners."""
    hw, hh = template_w / 2.0, template_h / 2.0
    corners = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
    pts = corners @ state.matrix().T + np.array([state.tx, state.ty])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return (float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1]))
