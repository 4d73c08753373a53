"""IoU, greedy matching, 101-point interpolated AP and per-class evaluation reports."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from copyspace.annotations import (
    BoundingBox,
    ComplexityClass,
    DatasetManifest,
    Detection,
    GroundTruth,
    parse_detections,
)
from copyspace.errors import ArgumentError, UndefinedMetricError, ValidationError

# 0.50, 0.55, ..., 0.95 written as exact decimal quotients
COCO_THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(10))
RECALL_POINTS = tuple(i / 100 for i in range(101))

REPORT_CAVEATS = (
    "copyspace is not unique: a sensible region absent from the annotations counts as a false positive",
    "meanIoU = mean IoU over greedy matches at the primary IoU threshold",
    "overall = pooled over all images (image-weighted); macro = unweighted mean over classes",
)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return min(inter / union, 1.0)


@dataclass
class MatchResult:
    pairs: list[tuple[Detection, GroundTruth, float]] = field(default_factory=list)
    unmatched_detections: list[Detection] = field(default_factory=list)
    unmatched_gts: list[GroundTruth] = field(default_factory=list)

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return len(self.unmatched_detections)

    @property
    def fn(self) -> int:
        return len(self.unmatched_gts)


def _greedy(dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_threshold: float):
    """Yield (det, gt index or None, iou) in detection order."""
    taken = [False] * len(gts)
    for d in dets:
        best, best_iou = None, -1.0
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            o = iou(d.box, g.box)
            if o > best_iou:
                best, best_iou = j, o
        if best is not None and best_iou >= iou_threshold:
            taken[best] = True
            yield d, best, best_iou
        else:
            yield d, None, 0.0


def match_greedy(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_threshold: float = 0.5
) -> MatchResult:
    """Match one image's detections to its ground truths.

    Detections are visited in confidence order; each claims the still-free
    ground truth it overlaps most, provided that overlap reaches the
    threshold. There is no re-matching.
    """
    ids = {d.image_id for d in dets} | {g.image_id for g in gts}
    if len(ids) > 1:
        raise ArgumentError(f"match_greedy needs a single image, got ids {sorted(ids)}")
    if any(a.confidence < b.confidence for a, b in zip(dets, dets[1:])):
        raise ArgumentError("detections must be sorted by confidence descending")
    result = MatchResult()
    used = set()
    for d, j, o in _greedy(dets, gts, iou_threshold):
        if j is None:
            result.unmatched_detections.append(d)
        else:
            used.add(j)
            result.pairs.append((d, gts[j], o))
    result.unmatched_gts = [g for j, g in enumerate(gts) if j not in used]
    return result


@dataclass
class PrCurve:
    points: list[tuple[float, float]]

    def interpolated_ap(self) -> float:
        """Mean over 101 recall levels of the best precision at recall >= level."""
        # suffix maximum of precision, walking back from the highest recall
        best_from = []
        running = 0.0
        for r, p in reversed(self.points):
            running = max(running, p)
            best_from.append((r, running))
        best_from.reverse()
        total = 0.0
        k = 0
        for level in RECALL_POINTS:
            while k < len(best_from) and best_from[k][0] < level:
                k += 1
            if k == len(best_from):
                break
            total += best_from[k][1]
        return total / len(RECALL_POINTS)


def _group(items: Iterable) -> dict[str, list]:
    out: dict[str, list] = defaultdict(list)
    for it in items:
        out[it.image_id].append(it)
    return out


def _ranked(dets: Iterable[Detection]) -> list[Detection]:
    # stable: equal confidences keep input order
    return sorted(dets, key=lambda d: -d.confidence)


def pr_curve(dets: Iterable[Detection], gts: Iterable[GroundTruth], iou_threshold: float) -> PrCurve:
    gts_by_image = _group(gts)
    n_gt = sum(len(v) for v in gts_by_image.values())
    if n_gt == 0:
        raise UndefinedMetricError("average precision is undefined without ground truths")
    ranked = _ranked(dets)
    ranks: dict[str, list[int]] = defaultdict(list)
    for i, d in enumerate(ranked):
        ranks[d.image_id].append(i)
    is_tp = [False] * len(ranked)
    for image_id, idx in ranks.items():
        image_dets = [ranked[i] for i in idx]
        for i, (_, j, _) in zip(idx, _greedy(image_dets, gts_by_image.get(image_id, []), iou_threshold)):
            is_tp[i] = j is not None
    points = []
    tp = fp = 0
    for i in range(len(ranked)):
        if is_tp[i]:
            tp += 1
        else:
            fp += 1
        points.append((tp / n_gt, tp / (tp + fp)))
    return PrCurve(points)


def average_precision(
    dets: Iterable[Detection], gts: Iterable[GroundTruth], iou_threshold: float = 0.5
) -> float:
    """101-point interpolated AP with detections pooled over all images."""
    return pr_curve(dets, gts, iou_threshold).interpolated_ap()


def map_range(
    dets: Iterable[Detection],
    gts: Iterable[GroundTruth],
    thresholds: Sequence[float] = COCO_THRESHOLDS,
) -> float:
    if not thresholds:
        raise ArgumentError("map_range needs at least one IoU threshold")
    dets, gts = list(dets), list(gts)
    return sum(average_precision(dets, gts, t) for t in thresholds) / len(thresholds)


def matched_ious(
    dets: Iterable[Detection], gts: Iterable[GroundTruth], iou_threshold: float = 0.5
) -> list[float]:
    gts_by_image = _group(gts)
    out = []
    for image_id, image_dets in sorted(_group(_ranked(dets)).items()):
        out.extend(o for _, j, o in _greedy(image_dets, gts_by_image.get(image_id, []), iou_threshold)
                   if j is not None)
    return out


def mean_matched_iou(
    dets: Iterable[Detection], gts: Iterable[GroundTruth], iou_threshold: float = 0.5
) -> float:
    ious = matched_ious(dets, gts, iou_threshold)
    if not ious:
        raise UndefinedMetricError("mean IoU is undefined: no detection matched a ground truth")
    return math.fsum(ious) / len(ious)


def parse_range(text: str) -> tuple[float, ...]:
    """Parse ``start:stop:step`` (inclusive stop), e.g. ``0.5:0.95:0.05``."""
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise ArgumentError(f"range must look like start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start or not (0 <= start and stop <= 1):
        raise ArgumentError(f"invalid threshold range {text!r}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(n))


@dataclass
class ClassMetrics:
    """One report row. Metric fields are ``None`` where undefined."""

    n_images: int
    n_ground_truths: int
    map_50: float | None
    map_50_95: float | None
    mean_iou: float | None


@dataclass
class EvalReport:
    per_class: dict[int, ClassMetrics]
    overall: ClassMetrics
    macro: ClassMetrics
    iou_threshold: float
    thresholds: tuple[float, ...]
    weighting: str = "image-weighted"

    def to_dict(self) -> dict:
        return {
            "weighting": self.weighting,
            "iou_threshold": self.iou_threshold,
            "thresholds": list(self.thresholds),
            "caveats": list(REPORT_CAVEATS),
            "per_class": {str(k): asdict(v) for k, v in sorted(self.per_class.items())},
            "overall": asdict(self.overall),
            "macro": asdict(self.macro),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def to_table(self) -> str:
        lo, hi = self.thresholds[0], self.thresholds[-1]
        header = ["Class", "N", f"mAP@{self.iou_threshold:g}", f"mAP@{lo:g}:{hi:g}", "meanIoU"]
        rows = [[f"Class {k}", *_row(m)] for k, m in sorted(self.per_class.items())]
        rows.append(["Overall", *_row(self.overall)])
        rows.append(["Macro", *_row(self.macro)])
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]

        def fmt(r):
            return "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))

        rule = "=" * len(fmt(header))
        lines = [f"# {c}" for c in REPORT_CAVEATS]
        lines += [rule, fmt(header), rule, *map(fmt, rows), rule]
        return "\n".join(lines) + "\n"


def _pct(v: float | None) -> str:
    return "-" if v is None else f"{100 * v:.1f}"


def _row(m: ClassMetrics) -> list[str]:
    return [str(m.n_images), _pct(m.map_50), _pct(m.map_50_95), _pct(m.mean_iou)]


def _class_metrics(n_images, dets, gts, iou_threshold, thresholds) -> ClassMetrics:
    if not gts:
        return ClassMetrics(n_images, 0, None, None, None)
    ious = matched_ious(dets, gts, iou_threshold)
    return ClassMetrics(
        n_images=n_images,
        n_ground_truths=len(gts),
        map_50=average_precision(dets, gts, iou_threshold),
        map_50_95=map_range(dets, gts, thresholds),
        mean_iou=math.fsum(ious) / len(ious) if ious else None,
    )


def _mean_defined(values) -> float | None:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def evaluate_dataset(
    manifest: DatasetManifest,
    dets: str | Iterable[Detection],
    ground_truths: Mapping[str, Sequence[GroundTruth]],
    iou_threshold: float = 0.5,
    thresholds: Sequence[float] = COCO_THRESHOLDS,
) -> EvalReport:
    """Evaluate detections per complexity class and over the whole manifest.

    ``ground_truths`` maps each entry's ``image_id`` to its boxes; detections
    may be given as a detection document. A detection whose ``image_id`` is
    unknown to the manifest is a :class:`ValidationError`.
    """
    if isinstance(dets, str):
        dets = parse_detections(dets)
    dets = list(dets)
    thresholds = tuple(thresholds)
    if not thresholds:
        raise ArgumentError("need at least one IoU threshold")

    class_of: dict[str, ComplexityClass] = {}
    for e in manifest.entries:
        if e.image_id in class_of:
            raise ValidationError(f"two manifest entries share the image id {e.image_id!r}")
        class_of[e.image_id] = e.complexity_class
    for d in dets:
        if d.image_id not in class_of:
            raise ValidationError(f"detection refers to unknown image id {d.image_id!r}")

    by_class_dets: dict[int, list] = defaultdict(list)
    by_class_gts: dict[int, list] = defaultdict(list)
    n_images: dict[int, int] = defaultdict(int)
    for image_id, cls in class_of.items():
        n_images[cls.level] += 1
        for g in ground_truths.get(image_id, ()):
            if g.image_id != image_id:
                g = GroundTruth(image_id, g.box, g.category)
            by_class_gts[cls.level].append(g)
    for d in dets:
        by_class_dets[class_of[d.image_id].level].append(d)

    per_class = {
        k: _class_metrics(n, by_class_dets[k], by_class_gts[k], iou_threshold, thresholds)
        for k, n in sorted(n_images.items())
    }
    all_gts = [g for k in sorted(by_class_gts) for g in by_class_gts[k]]
    if not all_gts:
        raise UndefinedMetricError("the dataset has no ground truths; every metric is undefined")
    overall = _class_metrics(len(class_of), dets, all_gts, iou_threshold, thresholds)
    macro = ClassMetrics(
        n_images=len(class_of),
        n_ground_truths=len(all_gts),
        map_50=_mean_defined(m.map_50 for m in per_class.values()),
        map_50_95=_mean_defined(m.map_50_95 for m in per_class.values()),
        mean_iou=_mean_defined(m.mean_iou for m in per_class.values()),
    )
    return EvalReport(per_class, overall, macro, iou_threshold, thresholds)
