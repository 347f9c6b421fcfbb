"""Center location error, overlap rate and per-sequence summaries."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


def _center(box):
    x, y, w, h = box
    return x + w / 2.0, y + h / 2.0


def center_location_error(box_a, box_b) -> float:
    """Euclidean distance between box centres."""
    (ax, ay), (bx, by) = _center(box_a), _center(box_b)
    return math.hypot(ax - bx, ay - by)


def overlap_rate(box_t, box_g) -> float:
    """Intersection over union of two axis-aligned ``(x, y, w, h)`` boxes."""
    tx, ty, tw, th = box_t
    gx, gy, gw, gh = box_g
    iw = min(tx + tw, gx + gw) - max(tx, gx)
    ih = min(ty + th, gy + gh) - max(ty, gy)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = tw * th + gw * gh - inter
    return inter / union


@dataclass
class SequenceReport:
    cle: np.ndarray
    overlap: np.ndarray
    mean_cle: float
    mean_overlap: float
    n_frames: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["frame", "cle", "overlap"])
        for i, (c, o) in enumerate(zip(self.cle, self.overlap), start=1):
            writer.writerow([i, repr(float(c)), repr(float(o))])
        return buf.getvalue()

    def summary_lines(self) -> str:
        return f"mean_cle,{self.mean_cle!r}\nmean_overlap,{self.mean_overlap!r}\n"


def summarize(boxes: Sequence, gt) -> SequenceReport:
    """Per-frame metrics of tracked boxes against ground truth, plus their means.

    ``boxes`` may hold ``TrackResult`` objects or plain ``(x, y, w, h)`` tuples.
    The first (initialization) frame is included in the means.
    """
    boxes = [getattr(b, "bbox", b) for b in boxes]
    if not boxes:
        raise ValueError("no tracking results to summarize")
    gt_boxes = [tuple(float(v) for v in g) for g in getattr(gt, "boxes", gt)]
    if len(gt_boxes) < len(boxes):
        raise ValueError(f"ground truth has {len(gt_boxes)} boxes for {len(boxes)} results")
    if len(gt_boxes) > len(boxes):
        log.warning("ignoring %d ground-truth rows beyond the last result", len(gt_boxes) - len(boxes))
    cle = np.array([center_location_error(b, g) for b, g in zip(boxes, gt_boxes)])
    ov = np.array([overlap_rate(b, g) for b, g in zip(boxes, gt_boxes)])
    return SequenceReport(cle, ov, float(cle.mean()), float(ov.mean()), len(boxes))
