"""Frame loading, affine patch sampling, ground-truth parsing and overlays."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from igdts.geometry import AffineState, affine_matrices

IMAGE_EXTENSIONS = {".pgm", ".ppm", ".pnm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
LUMA = np.array([0.299, 0.587, 0.114])
_DIGITS = re.compile(r"(\d+)(?!.*\d)")


@dataclass
class Frame:
    """Grayscale image with values in [0, 1], indexed ``pixels[row, col]``."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 2:
            raise ValueError("frame pixels must be a 2-d array")
        if self.pixels.size and not (self.pixels.min() >= 0.0 and self.pixels.max() <= 1.0):
            raise ValueError("frame pixels must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class GroundTruth:
    """Per-frame boxes ``(x, y, w, h)``; row ``i`` belongs to frame ``i + 1``."""

    boxes: np.ndarray

    def __len__(self):
        return len(self.boxes)

    def __getitem__(self, i):
        return tuple(float(v) for v in self.boxes[i])


def image_to_gray(img: Image.Image) -> np.ndarray:
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=float)
        return arr / (65535.0 if arr.max() > 255 else 255.0)
    if img.mode == "L":
        return np.asarray(img, dtype=float) / 255.0
    if img.mode == "1":
        return np.asarray(img.convert("L"), dtype=float) / 255.0
    rgb = np.asarray(img.convert("RGB"), dtype=float) / 255.0
    return rgb @ LUMA


def read_frame(path) -> Frame:
    try:
        with Image.open(path) as img:
            img.load()
            return Frame(np.clip(image_to_gray(img), 0.0, 1.0))
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc


def frame_index(path) -> int:
    m = _DIGITS.search(Path(path).stem)
    if m is None:
        raise ValueError(f"file name {Path(path).name} has no frame number")
    return int(m.group(1))


def list_sequence(dir_path, pattern: str = "*") -> list[Path]:
    """Image files matching ``pattern`` in numeric order; gaps are an error."""
    root = Path(dir_path)
    if not root.is_dir():
        raise FileNotFoundError(f"sequence directory not found: {dir_path}")
    files = [p for p in root.glob(pattern) if p.suffix.lower() in IMAGE_EXTENSIONS and p.is_file()]
    if not files:
        raise FileNotFoundError(f"no images matching {pattern!r} in {dir_path}")
    indexed = sorted((frame_index(p), p.name, p) for p in files)
    numbers = [i for i, _, _ in indexed]
    if len(set(numbers)) != len(numbers):
        raise ValueError(f"duplicate frame numbers in {dir_path}")
    for prev, cur in zip(numbers, numbers[1:]):
        if cur != prev + 1:
            raise ValueError(f"gap in frame numbers: {prev} is followed by {cur}")
    return [p for _, _, p in indexed]


def load_sequence(dir_path, pattern: str = "*") -> list[Frame]:
    return [read_frame(p) for p in list_sequence(dir_path, pattern)]


def template_grid(side: int) -> np.ndarray:
    """Template coordinates of patch pixel centres, row-major, shape ``(side*side, 2)``."""
    c = np.arange(side) + 0.5 - side / 2.0
    u, v = np.meshgrid(c, c)
    return np.column_stack([u.ravel(), v.ravel()])


def bilinear(img: np.ndarray, x, y) -> np.ndarray:
    """Sample ``img`` at continuous pixel-index coordinates, clamping to the border."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    coords = np.stack([y.ravel(), x.ravel()])
    out = ndimage.map_coordinates(img, coords, order=1, mode="nearest", prefilter=False)
    return out.reshape(x.shape)


def warp_patches(frame: Frame, states: np.ndarray, side: int) -> np.ndarray:
    """Sample one ``side x side`` patch per state row; returns ``(N, side*side)``."""
    if side < 2:
        raise ValueError("patch side must be at least 2")
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if not np.all(np.isfinite(states)):
        raise ValueError("state has non-finite parameters")
    grid = template_grid(side)
    A = affine_matrices(states)
    # frame coords, then shift from pixel-edge to pixel-index convention
    xs = np.einsum("nj,pj->np", A[:, 0, :], grid) + states[:, :1] - 0.5
    ys = np.einsum("nj,pj->np", A[:, 1, :], grid) + states[:, 1:2] - 0.5
    return bilinear(frame.pixels, xs, ys)


def warp_patch(frame: Frame, state: AffineState, side: int = 32) -> np.ndarray:
    """Observation vector for one state, flattened row-major."""
    return warp_patches(frame, state.to_array(), side)[0]


def region_visible(frame: Frame, states: np.ndarray, template_side: int) -> np.ndarray:
    """True for states whose warped template overlaps the frame at all."""
    states = np.atleast_2d(states)
    h = template_side / 2.0
    corners = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
    A = affine_matrices(states)
    pts = np.einsum("nij,cj->nci", A, corners) + states[:, None, :2]
    lo, hi = pts.min(axis=1), pts.max(axis=1)
    return (hi[:, 0] > 0) & (lo[:, 0] < frame.width) & (hi[:, 1] > 0) & (lo[:, 1] < frame.height)


def parse_ground_truth(path) -> GroundTruth:
    """Read one box per line: ``x,y,w,h`` or an 8-number polygon, comma/tab/space separated."""
    boxes = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                if lineno == 1:
                    raise ValueError(f"{path}:{lineno}: empty line")
                continue
            parts = [p for p in re.split(r"[,\t ]+", text) if p]
            try:
                nums = [float(p) for p in parts]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed line {text!r}") from None
            if len(nums) == 4:
                box = nums
            elif len(nums) == 8:
                xs, ys = nums[0::2], nums[1::2]
                box = [min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)]
            else:
                raise ValueError(f"{path}:{lineno}: expected 4 or 8 numbers, got {len(nums)}")
            if not all(np.isfinite(box)) or box[2] <= 0 or box[3] <= 0:
                raise ValueError(f"{path}:{lineno}: box must have positive width and height")
            boxes.append(box)
    if not boxes:
        raise ValueError(f"{path}: no boxes")
    return GroundTruth(np.array(boxes, dtype=float))


def write_ground_truth(path, boxes) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for b in boxes:
            fh.write(",".join(_fmt(v) for v in b) + "\n")


def _fmt(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def draw_boxes(frame: Frame, boxes_colors) -> np.ndarray:
    """RGB uint8 rendering of ``frame`` with 1-px box outlines, clipped to the frame."""
    gray = to_uint8(frame.pixels)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    h, w = gray.shape
    for box, color in boxes_colors:
        x, y, bw, bh = box
        x0, y0 = int(round(x)), int(round(y))
        x1, y1 = x0 + int(round(bw)) - 1, y0 + int(round(bh)) - 1
        if x1 < x0 or y1 < y0:
            continue
        cx0, cx1 = max(x0, 0), min(x1, w - 1)
        cy0, cy1 = max(y0, 0), min(y1, h - 1)
        if cx0 > cx1 or cy0 > cy1:
            continue
        color = np.asarray(color, dtype=np.uint8)
        for row in (y0, y1):
            if 0 <= row < h:
                rgb[row, cx0 : cx1 + 1] = color
        for col in (x0, x1):
            if 0 <= col < w:
                rgb[cy0 : cy1 + 1, col] = color
    return rgb


def write_overlay(frame: Frame, boxes_colors, path) -> None:
    """Encode ``frame`` with box outlines to ``path`` (format from the extension)."""
    rgb = draw_boxes(frame, boxes_colors)
    tmp = f"{path}.tmp{Path(path).suffix}"
    Image.fromarray(rgb, mode="RGB").save(tmp)
    os.replace(tmp, path)


def save_gray(pixels: np.ndarray, path) -> None:
    Image.fromarray(to_uint8(pixels), mode="L").save(path)
