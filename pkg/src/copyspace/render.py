"""Overlays and placeholder ad designs composited into detected copyspace."""

from __future__ import annotations

import math
import textwrap
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from copyspace.annotations import BoundingBox, Detection, GroundTruth
from copyspace.detector import DetectionSet, DetectParams, parameter_sweep
from copyspace.errors import ArgumentError, NoCandidatesError
from copyspace.imaging import pixel_rect, to_luma

GREEN = (0.0, 1.0, 0.0)
MAGENTA = (1.0, 0.0, 1.0)
# nominal glyph advance used to size the per-line character budget
CHAR_PX = 24
BAR_FILL = 0.7


def _check_rgb(c, name):
    if len(c) != 3 or not all(0.0 <= v <= 1.0 for v in c):
        raise ArgumentError(f"{name} must be an RGB triple in [0, 1], got {c!r}")


@dataclass(frozen=True)
class OverlayStyle:
    gt_color: tuple[float, float, float] = GREEN
    det_color: tuple[float, float, float] = MAGENTA
    line_width: int = 2
    draw_scores: bool = False

    def __post_init__(self):
        _check_rgb(self.gt_color, "gt_color")
        _check_rgb(self.det_color, "det_color")
        if tuple(self.gt_color) == tuple(self.det_color):
            raise ArgumentError("ground-truth and detection colors must differ")
        if self.line_width < 1:
            raise ArgumentError("line_width must be >= 1")


@dataclass(frozen=True)
class DesignSpec:
    copy_text: str = ""
    panel_opacity: float = 0.6
    panel_color: tuple[float, float, float] = (1.0, 1.0, 1.0)
    text_color: tuple[float, float, float] = (0.0, 0.0, 0.0)
    padding_frac: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.panel_opacity <= 1.0:
            raise ArgumentError("panel_opacity must lie in [0, 1]")
        if not 0.0 <= self.padding_frac <= 0.4:
            raise ArgumentError("padding_frac must lie in [0, 0.4]")
        _check_rgb(self.panel_color, "panel_color")
        _check_rgb(self.text_color, "text_color")


def _color_image(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ArgumentError(f"expected an (H, W, 3) color image, got shape {img.shape}")
    return img


def _rect_in(box: BoundingBox, img: np.ndarray) -> tuple[int, int, int, int]:
    h, w = img.shape[:2]
    if not box.within(w, h):
        raise ArgumentError(f"box {box.as_tuple()} is outside the {w}x{h} image")
    return pixel_rect(box)


def outline_mask(shape: tuple[int, int], box: BoundingBox, line_width: int) -> np.ndarray:
    """Pixels of a ``line_width``-thick outline drawn inside the box edge."""
    x0, y0, x1, y1 = pixel_rect(box)
    mask = np.zeros(shape, dtype=bool)
    mask[y0:y1, x0:x1] = True
    mask[y0 + line_width:y1 - line_width, x0 + line_width:x1 - line_width] = False
    return mask


def _score_mask(shape, x: int, y: int, text: str) -> np.ndarray:
    h, w = shape
    canvas = Image.new("L", (w, h), 0)
    ImageDraw.Draw(canvas).text((x, y), text, fill=255)
    return np.asarray(canvas) > 0


def draw_overlay(
    image: np.ndarray,
    gts: Sequence[GroundTruth] = (),
    dets: Sequence[Detection] = (),
    style: OverlayStyle | None = None,
) -> np.ndarray:
    """Outline ground truths, then detections on top, in a copy of ``image``."""
    style = style or OverlayStyle()
    out = _color_image(image).copy()
    shape = out.shape[:2]
    for gt in gts:
        _rect_in(gt.box, out)
        out[outline_mask(shape, gt.box, style.line_width)] = style.gt_color
    for det in dets:
        x0, y0, _, _ = _rect_in(det.box, out)
        out[outline_mask(shape, det.box, style.line_width)] = style.det_color
        if style.draw_scores:
            off = style.line_width + 1
            out[_score_mask(shape, x0 + off, y0 + off, f"{det.confidence:.2f}")] = style.det_color
    return out


def _wrap(text: str, budget: int) -> list[str]:
    return textwrap.wrap(text, width=budget, break_long_words=True) if text.strip() else []


def render_design(image: np.ndarray, box: BoundingBox, spec: DesignSpec) -> np.ndarray:
    """Composite a translucent panel and placeholder text bars into ``box``.

    The box is rounded inward to whole pixels, so nothing outside it changes.
    Text wraps at ``interior_width // CHAR_PX`` characters per line; each line
    is a left-aligned bar whose length is proportional to its character count.
    """
    out = _color_image(image).copy()
    h, w = out.shape[:2]
    if not box.within(w, h):
        raise ArgumentError(f"box {box.as_tuple()} is outside the {w}x{h} image")
    x0, y0 = math.ceil(box.x0 - 1e-9), math.ceil(box.y0 - 1e-9)
    x1, y1 = math.floor(box.x1 + 1e-9), math.floor(box.y1 + 1e-9)
    bw, bh = x1 - x0, y1 - y0
    px, py = round(spec.padding_frac * bw), round(spec.padding_frac * bh)
    ix0, iy0, ix1, iy1 = x0 + px, y0 + py, x1 - px, y1 - py
    if bw <= 0 or bh <= 0 or ix1 <= ix0 or iy1 <= iy0:
        raise ArgumentError(f"design box {box.as_tuple()} leaves no interior after padding")

    a = spec.panel_opacity
    if a > 0:
        region = out[y0:y1, x0:x1]
        out[y0:y1, x0:x1] = (1.0 - a) * region + a * np.asarray(spec.panel_color)

    iw, ih = ix1 - ix0, iy1 - iy0
    budget = max(1, iw // CHAR_PX)
    lines = _wrap(spec.copy_text, budget)
    if lines:
        line_h = ih / len(lines)
        gap = (1.0 - BAR_FILL) / 2 * line_h
        for i, line in enumerate(lines):
            top = iy0 + round(i * line_h + gap)
            bottom = iy0 + round((i + 1) * line_h - gap)
            right = ix0 + max(1, round(iw * len(line) / budget))
            if bottom > top:
                out[top:bottom, ix0:min(right, ix1)] = spec.text_color
    return out


@dataclass(frozen=True)
class Design:
    grid_index: int
    params: DetectParams
    box: BoundingBox
    image: np.ndarray


@dataclass
class Variations:
    designs: list[Design] = field(default_factory=list)
    # grid indices whose detection set came back empty
    empty: list[int] = field(default_factory=list)
    detection_sets: list[DetectionSet] = field(default_factory=list)


def generate_variations(
    image: np.ndarray, spec: DesignSpec, grid: Sequence[DetectParams], image_id: str = ""
) -> Variations:
    """Render one design per grid entry into that entry's top-scoring box."""
    img = _color_image(image)
    sets = parameter_sweep(to_luma(img), grid, image_id)
    result = Variations(detection_sets=sets)
    for i, ds in enumerate(sets):
        if not ds.boxes:
            result.empty.append(i)
            continue
        top = ds.boxes[0].box
        result.designs.append(Design(i, ds.params, top, render_design(img, top, spec)))
    if not result.designs:
        raise NoCandidatesError(f"none of the {len(grid)} parameter sets produced a candidate")
    return result
