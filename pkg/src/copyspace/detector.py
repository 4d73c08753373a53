"""Heuristic copyspace detector over Sobel complexity maps.

Candidates are axis-aligned rectangles on a grid of scales, aspect ratios and
positions. Each is scored by how empty it is and how large it is::

    score = (1 - mean_complexity) * area_frac ** area_exponent

then greedy NMS keeps a diverse top-k.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from copyspace.annotations import BoundingBox, Detection
from copyspace.errors import ArgumentError, EmptyCandidateError, ParseError
from copyspace.imaging import IntegralImage, as_gray, build_integral, complexity_map, pixel_rect
from copyspace.metrics import iou

_EPS = 1e-9


@dataclass(frozen=True)
class DetectParams:
    min_area_frac: float = 0.05
    aspect_ratios: tuple[float, ...] = (1.0, 2.0, 0.5, 3.0)
    scale_steps: int = 4
    stride_frac: float = 0.05
    max_complexity: float = 0.25
    area_exponent: float = 0.15
    nms_iou: float = 0.3
    top_k: int = 5
    margin_frac: float = 0.02

    def __post_init__(self):
        object.__setattr__(self, "aspect_ratios", tuple(float(a) for a in self.aspect_ratios))
        checks = [
            (0 < self.min_area_frac <= 1, "min_area_frac must lie in (0, 1]"),
            (len(self.aspect_ratios) > 0, "aspect_ratios must be non-empty"),
            (all(math.isfinite(a) and a > 0 for a in self.aspect_ratios), "aspect ratios must be > 0"),
            (_is_int(self.scale_steps) and self.scale_steps >= 1, "scale_steps must be an integer >= 1"),
            (0 < self.stride_frac <= 1, "stride_frac must lie in (0, 1]"),
            (0 <= self.max_complexity <= 1, "max_complexity must lie in [0, 1]"),
            (math.isfinite(self.area_exponent) and self.area_exponent >= 0, "area_exponent must be >= 0"),
            (0 <= self.nms_iou <= 1, "nms_iou must lie in [0, 1]"),
            (_is_int(self.top_k) and self.top_k >= 1, "top_k must be an integer >= 1"),
            (0 <= self.margin_frac <= 0.4, "margin_frac must lie in [0, 0.4]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ArgumentError(msg)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["aspect_ratios"] = list(self.aspect_ratios)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> DetectParams:
        if not isinstance(data, dict):
            raise ParseError("params record must be an object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParseError(f"unknown params fields {sorted(unknown)}")
        try:
            return cls(**data)
        except (ArgumentError, TypeError) as exc:
            raise ParseError(str(exc)) from None


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def load_params(text: str) -> DetectParams:
    try:
        return DetectParams.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid params document: {exc.msg}", f"line {exc.lineno}") from None


def load_grid(text: str) -> list[DetectParams]:
    """A grid document is a JSON list of params records (or ``{"grid": [...]}``)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid grid document: {exc.msg}", f"line {exc.lineno}") from None
    if isinstance(doc, dict):
        doc = doc.get("grid")
    if not isinstance(doc, list):
        raise ParseError("grid document must be a list of params records")
    grid = []
    for i, rec in enumerate(doc):
        try:
            grid.append(DetectParams.from_dict(rec))
        except ParseError as exc:
            raise ParseError(str(exc), f"grid row {i}") from None
    return grid


@dataclass(frozen=True)
class ScoredBox:
    box: BoundingBox
    score: float
    mean_complexity: float


@dataclass(frozen=True)
class DetectionSet:
    image_id: str
    params: DetectParams
    width: int
    height: int
    boxes: tuple[ScoredBox, ...] = field(default_factory=tuple)

    def detections(self) -> list[Detection]:
        return [Detection(self.image_id, b.box, b.score) for b in self.boxes]

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "width": self.width,
            "height": self.height,
            "params": self.params.to_dict(),
            "boxes": [
                {
                    "x0": float(b.box.x0), "y0": float(b.box.y0),
                    "x1": float(b.box.x1), "y1": float(b.box.y1),
                    "score": float(b.score), "mean_complexity": float(b.mean_complexity),
                }
                for b in self.boxes
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _frame(width: int, height: int, margin_frac: float) -> tuple[int, int, int, int]:
    """Integer margin-inset frame (left, top, right, bottom)."""
    mx, my = margin_frac * width, margin_frac * height
    return math.ceil(mx - _EPS), math.ceil(my - _EPS), math.floor(width - mx + _EPS), math.floor(height - my + _EPS)


def _positions(lo: int, hi: int, size: int, stride: int) -> list[int]:
    last = hi - size
    pos = list(range(lo, last + 1, stride))
    if pos[-1] != last:
        pos.append(last)
    return pos


def _candidate_array(width: int, height: int, params: DetectParams) -> np.ndarray:
    if width < 1 or height < 1:
        raise ArgumentError(f"invalid image size {width}x{height}")
    left, top, right, bottom = _frame(width, height, params.margin_frac)
    fw, fh = right - left, bottom - top
    a_min = params.min_area_frac * width * height
    stride = max(1, round(params.stride_frac * min(width, height)))
    sizes: list[list[tuple[int, int]]] = [[] for _ in range(params.scale_steps)]
    for aspect in params.aspect_ratios:
        if fw <= 0 or fh <= 0:
            break
        h_max = min(fh, fw / aspect)
        a_max = aspect * h_max * h_max
        if a_min > a_max * (1 + _EPS):
            continue
        for k in range(params.scale_steps):
            t = k / (params.scale_steps - 1) if params.scale_steps > 1 else 0.0
            area = a_min * (a_max / a_min) ** t
            w = min(fw, max(1, math.ceil(math.sqrt(area * aspect) - _EPS)))
            h = min(fh, max(1, math.ceil(math.sqrt(area / aspect) - _EPS)))
            sizes[k].append((w, h))
    rects = []
    for per_scale in sizes:
        for w, h in per_scale:
            ys = _positions(top, bottom, h, stride)
            xs = _positions(left, right, w, stride)
            gx, gy = np.meshgrid(np.asarray(xs), np.asarray(ys))
            x0, y0 = gx.ravel(), gy.ravel()
            rects.append(np.stack([x0, y0, x0 + w, y0 + h], axis=1))
    if not rects:
        raise EmptyCandidateError(
            f"no candidate with area >= {params.min_area_frac:g} of the image fits "
            f"inside the {params.margin_frac:g} margin of a {width}x{height} image"
        )
    allr = np.concatenate(rects).astype(np.int64)
    # first occurrence wins, keeping scale/aspect/row-major order
    _, first = np.unique(allr, axis=0, return_index=True)
    return allr[np.sort(first)]


def enumerate_candidates(image_width: int, image_height: int, params: DetectParams) -> list[BoundingBox]:
    """Candidate rectangles inside the margin frame.

    For every scale (geometric from ``min_area_frac`` of the image up to the
    largest box of that aspect fitting the frame) and every aspect ratio, a
    box slides over the frame at ``stride_frac * min(W, H)`` pixels, plus one
    final position flush with the right/bottom edge. Sizes are rounded up to
    whole pixels. Order: scale, then aspect, then row-major.
    """
    arr = _candidate_array(image_width, image_height, params)
    return [BoundingBox(*map(float, r)) for r in arr]


def _score_array(integral: IntegralImage, rects: np.ndarray, params: DetectParams):
    w = rects[:, 2] - rects[:, 0]
    h = rects[:, 3] - rects[:, 1]
    areas = (w * h).astype(np.float64)
    means = np.clip(integral.region_sums(rects) / areas, 0.0, 1.0)
    area_frac = areas / (integral.width * integral.height)
    scores = (1.0 - means) * area_frac ** params.area_exponent
    keep = means <= params.max_complexity
    rects, areas, means, scores = rects[keep], areas[keep], means[keep], scores[keep]
    # score desc, then area desc, then y0 asc, then x0 asc
    order = np.lexsort((rects[:, 0], rects[:, 1], -areas, -scores))
    return rects[order], scores[order], means[order]


def _as_rects(candidates: Sequence[BoundingBox]) -> np.ndarray:
    if not candidates:
        return np.zeros((0, 4), dtype=np.int64)
    return np.array([pixel_rect(b) for b in candidates], dtype=np.int64)


def score_candidates(
    integral: IntegralImage, candidates: Sequence[BoundingBox], params: DetectParams
) -> list[ScoredBox]:
    rects = _as_rects(candidates)
    if len(rects) and (
        rects[:, :2].min() < 0 or rects[:, 2].max() > integral.width or rects[:, 3].max() > integral.height
    ):
        raise ArgumentError("candidate outside the image")
    rects, scores, means = _score_array(integral, rects, params)
    return [
        ScoredBox(BoundingBox(*map(float, r)), float(s), float(m))
        for r, s, m in zip(rects, scores, means)
    ]


def _nms_indices(rects: np.ndarray, nms_iou: float, limit: int | None) -> list[int]:
    x0, y0, x1, y1 = (rects[:, i].astype(np.float64) for i in range(4))
    areas = (x1 - x0) * (y1 - y0)
    alive = np.ones(len(rects), dtype=bool)
    keep: list[int] = []
    i = 0
    while i < len(rects):
        if alive[i]:
            keep.append(i)
            if limit is not None and len(keep) >= limit:
                break
            rest = slice(i + 1, None)
            iw = np.minimum(x1[i], x1[rest]) - np.maximum(x0[i], x0[rest])
            ih = np.minimum(y1[i], y1[rest]) - np.maximum(y0[i], y0[rest])
            inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
            overlap = inter / (areas[i] + areas[rest] - inter)
            alive[rest] &= overlap < nms_iou
        i += 1
    return keep


def nms(scored: Sequence[ScoredBox], nms_iou: float) -> list[ScoredBox]:
    """Greedy suppression: keep a box iff its IoU with every kept box is < ``nms_iou``."""
    if any(a.score < b.score for a, b in zip(scored, scored[1:])):
        raise ArgumentError("nms input must be sorted by score descending")
    kept: list[ScoredBox] = []
    for s in scored:
        if all(iou(s.box, k.box) < nms_iou for k in kept):
            kept.append(s)
    return kept


def _detect_from_integral(
    integral: IntegralImage, params: DetectParams, image_id: str
) -> DetectionSet:
    rects = _candidate_array(integral.width, integral.height, params)
    rects, scores, means = _score_array(integral, rects, params)
    keep = _nms_indices(rects, params.nms_iou, params.top_k)
    boxes = tuple(
        ScoredBox(BoundingBox(*map(float, rects[i])), float(scores[i]), float(means[i])) for i in keep
    )
    return DetectionSet(image_id, params, integral.width, integral.height, boxes)


def detect(image: np.ndarray, params: DetectParams | None = None, image_id: str = "") -> DetectionSet:
    """Run the full pipeline on a gray (or color) image."""
    params = params or DetectParams()
    integral = build_integral(complexity_map(as_gray(image)))
    return _detect_from_integral(integral, params, image_id)


def parameter_sweep(
    image: np.ndarray, grid: Sequence[DetectParams], image_id: str = ""
) -> list[DetectionSet]:
    """One detection set per grid entry, all sharing one complexity map."""
    if not grid:
        raise ArgumentError("parameter sweep needs a non-empty grid")
    integral = build_integral(complexity_map(as_gray(image)))
    return [_detect_from_integral(integral, p, image_id) for p in grid]


def variant_grid(base: DetectParams, n: int) -> list[DetectParams]:
    """``n`` parameter sets derived from ``base`` for design variations.

    Entry ``i`` restricts the search to one aspect ratio (cycling through
    ``base.aspect_ratios``); each further cycle doubles the area exponent.
    """
    if n < 1:
        raise ArgumentError("need at least one variant")
    k = len(base.aspect_ratios)
    return [
        replace(base, aspect_ratios=(base.aspect_ratios[i % k],),
                area_exponent=base.area_exponent * 2 ** (i // k))
        for i in range(n)
    ]
